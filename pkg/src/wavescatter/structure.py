"""Structure decomposition of the first-order wave operator and kernel-route application.

The first Born term of W+ is written as a superposition of elementary transformations

    W1+ f(x) = sum over atoms of weight * c(x) * f(S_w x + t w),

where S_w is the reflection across the plane orthogonal to w and the coefficient takes
coeff_minus on the half-space x.w < t/2 and coeff_plus on x.w > t/2. With ray samples
L1, L1~ along directions nu, an atom has axis w = -nu and coefficients
C L1(t nu) and -C L1~(t nu) with C = -i / (16 pi^3).
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy import fft

from .errors import BandLimitError, DomainError, SingularFamilyError
from .greens import FOUR_PI, PointSet, kernel_matrix, self_cell_mean
from .grids import Grid3, sphere_rule, trapezoid_weights
from .kernel_algebra import EtaGrid, EtaKernelFamily, t1_cores
from .potential_lab import Potential
from .ray_transform import RayProfile, leading_term

STRUCTURE_CONSTANT = -1j / (16.0 * math.pi ** 3)


@dataclass(frozen=True)
class StructureAtom:
    omega: tuple[float, float, float]
    t: float
    coeff_minus: complex
    coeff_plus: complex
    weight: float


@dataclass(frozen=True, eq=False)
class StructureDecomposition:
    """Atoms stored column-wise: omegas (A, 3), t, coeff_minus, coeff_plus, weights (A,)."""

    omegas: np.ndarray
    t: np.ndarray
    coeff_minus: np.ndarray
    coeff_plus: np.ndarray
    weights: np.ndarray
    label: str = ""
    t_cells: np.ndarray | None = None   # width of each atom's t quadrature cell

    def __post_init__(self):
        n = len(self.t)
        if self.omegas.shape != (n, 3) or any(len(a) != n for a in (self.coeff_minus, self.coeff_plus, self.weights)):
            raise DomainError("atom arrays have inconsistent lengths")
        if self.t_cells is not None and len(self.t_cells) != n:
            raise DomainError("atom arrays have inconsistent lengths")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def atoms(self) -> list[StructureAtom]:
        return [StructureAtom(tuple(float(v) for v in om), float(t), complex(a), complex(b), float(w))
                for om, t, a, b, w in zip(self.omegas, self.t, self.coeff_minus, self.coeff_plus, self.weights)]

    @property
    def mass(self) -> float:
        """Total variation sum of weight * (|coeff_minus| + |coeff_plus|)."""
        return float(self.weights @ (np.abs(self.coeff_minus) + np.abs(self.coeff_plus)))

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.omegas, self.t, self.coeff_minus, self.coeff_plus, self.weights):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["omega_x", "omega_y", "omega_z", "t", "re_minus", "im_minus", "re_plus", "im_plus", "weight"])
            for om, t, a, b, wt in zip(self.omegas, self.t, self.coeff_minus, self.coeff_plus, self.weights):
                w.writerow([repr(float(om[0])), repr(float(om[1])), repr(float(om[2])), repr(float(t)),
                            repr(float(a.real)), repr(float(a.imag)), repr(float(b.real)), repr(float(b.imag)),
                            repr(float(wt))])

    def manifest(self) -> dict:
        return {"label": self.label, "n_atoms": len(self), "mass": self.mass, "digest": self.digest(),
                "t_max": float(np.max(self.t, initial=0.0))}

    def write(self, csv_path: str | Path) -> None:
        self.to_csv(csv_path)
        Path(str(csv_path) + ".json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True),
                                                 encoding="utf-8")

    def truncated(self, t_cut: float) -> "StructureDecomposition":
        keep = self.t <= t_cut
        return StructureDecomposition(self.omegas[keep], self.t[keep], self.coeff_minus[keep],
                                      self.coeff_plus[keep], self.weights[keep], self.label,
                                      None if self.t_cells is None else self.t_cells[keep])

    def with_coefficients(self, coeff_minus, coeff_plus) -> "StructureDecomposition":
        return StructureDecomposition(self.omegas, self.t, np.asarray(coeff_minus, dtype=complex),
                                      np.asarray(coeff_plus, dtype=complex), self.weights, self.label,
                                      self.t_cells)


def structure_t_grid(t_max: float, dt: float = 0.2) -> tuple[np.ndarray, np.ndarray]:
    """Uniform t nodes on [0, t_max] with trapezoid weights; atoms oscillate in t, so keep dt small."""
    n = int(math.ceil(t_max / dt)) + 1
    t = np.linspace(0.0, (n - 1) * dt, n)
    return t, trapezoid_weights(t)


def _expand_directions(profile: RayProfile, sphere_order: int):
    """Direction nodes, weights, and per-direction L1, L1~ rows (radial profiles are broadcast)."""
    if profile.radial:
        nu, wn = sphere_rule(sphere_order)
        scale = float(np.sum(profile.omega_weights)) / float(np.sum(wn))
        rows = np.zeros(len(nu), dtype=int)
        return nu, wn * scale, profile.L1[rows], profile.L1_tilde[rows]
    return profile.omegas, profile.omega_weights, profile.L1, profile.L1_tilde


def decompose_w1(profile: RayProfile, sphere_order: int = 17) -> StructureDecomposition:
    """Atoms of W1+ from ray samples; radial profiles are spread over a sphere rule."""
    nu, wn, L1, L1t = _expand_directions(profile, sphere_order)
    nd, nt = L1.shape
    omegas = np.repeat(-nu, nt, axis=0)
    t = np.tile(profile.t, nd)
    weights = (wn[:, None] * profile.t_weights[None, :]).ravel()
    cm = (STRUCTURE_CONSTANT * L1).ravel()
    cp = (-STRUCTURE_CONSTANT * L1t).ravel()
    cells = np.tile(profile.t_weights, nd)
    return StructureDecomposition(omegas, t, cm, cp, weights, label=profile.label, t_cells=cells)


def decompose_s1(profile: RayProfile, sphere_order: int = 17) -> StructureDecomposition:
    """Atoms of the first-order scattering term S1 = W1+ - W1-.

    For real V the backward wave operator is W- f = conj(W+ conj f), so its atoms carry
    conjugated coefficients. The difference has coeff_minus = coeff_plus on every atom.
    """
    D = decompose_w1(profile, sphere_order)
    return D.with_coefficients(D.coeff_minus - D.coeff_minus.conj(), D.coeff_plus - D.coeff_plus.conj())


@dataclass(frozen=True, eq=False)
class AsymptoticSplit:
    leading: StructureDecomposition
    remainder: StructureDecomposition
    remainder_weighted_mass: float
    eps: float


def asymptotic_split(D: StructureDecomposition, V: Potential, eps: float = 0.5) -> AsymptoticSplit:
    """Split atoms into the C * (-4 <t>^-2 V^(0)) leading part and a remainder.

    The leading coefficient is the same on both half-spaces. The remainder mass is
    weighted by <t>^(1 + eps).
    """
    lead = STRUCTURE_CONSTANT * leading_term(V, D.t)
    L = D.with_coefficients(lead, lead)
    R = D.with_coefficients(D.coeff_minus - lead, D.coeff_plus - lead)
    wt = D.weights * (1.0 + D.t ** 2) ** (0.5 * (1.0 + eps))
    mass = float(wt @ (np.abs(R.coeff_minus) + np.abs(R.coeff_plus)))
    return AsymptoticSplit(L, R, mass, eps)


@numba.njit(cache=True)
def _apply_atoms(fr, fi, origin, h, carrier, xs, om, ts, cells, cm, cp, wts, out_r, out_i):
    n0, n1, n2 = fr.shape
    for p in range(xs.shape[0]):
        x0 = xs[p, 0]
        x1 = xs[p, 1]
        x2 = xs[p, 2]
        acc_r = 0.0
        acc_i = 0.0
        for a in range(ts.shape[0]):
            o0 = om[a, 0]
            o1 = om[a, 1]
            o2 = om[a, 2]
            t = ts[a]
            d = x0 * o0 + x1 * o1 + x2 * o2
            s = t - 2.0 * d
            u0 = (x0 + s * o0 - origin) / h
            u1 = (x1 + s * o1 - origin) / h
            u2 = (x2 + s * o2 - origin) / h
            if u0 < 0.0 or u1 < 0.0 or u2 < 0.0 or u0 >= n0 - 1 or u1 >= n1 - 1 or u2 >= n2 - 1:
                continue
            i0 = int(u0)
            i1 = int(u1)
            i2 = int(u2)
            g0 = u0 - i0
            g1 = u1 - i1
            g2 = u2 - i2
            vr = 0.0
            vi = 0.0
            for c0 in range(2):
                w0 = g0 if c0 else 1.0 - g0
                for c1 in range(2):
                    w01 = w0 * (g1 if c1 else 1.0 - g1)
                    for c2 in range(2):
                        ww = w01 * (g2 if c2 else 1.0 - g2)
                        vr += ww * fr[i0 + c0, i1 + c1, i2 + c2]
                        vi += ww * fi[i0 + c0, i1 + c1, i2 + c2]
            # fraction of the atom's t cell lying on the x.w > t/2 side
            width = cells[a]
            lo = t - 0.5 * width if t > 0.5 * width else 0.0
            if width > 0.0:
                fp = min(1.0, max(0.0, (2.0 * d - lo) / width))
            else:
                fp = 1.0 if d > 0.5 * t else 0.0
            c = cp[a] * fp + cm[a] * (1.0 - fp)
            ph = carrier[0] * (x0 + s * o0) + carrier[1] * (x1 + s * o1) + carrier[2] * (x2 + s * o2)
            c = c * complex(math.cos(ph), math.sin(ph))
            cw_r = wts[a] * c.real
            cw_i = wts[a] * c.imag
            acc_r += cw_r * vr - cw_i * vi
            acc_i += cw_r * vi + cw_i * vr
        out_r[p] = acc_r
        out_i[p] = acc_i


def _support_radius(values: np.ndarray, grid: Grid3, rel_tol: float) -> float:
    mag = np.abs(values)
    peak = float(np.max(mag, initial=0.0))
    if peak == 0.0:
        return 0.0
    ax = grid.axis()
    i, j, k = np.nonzero(mag > rel_tol * peak)
    return float(np.sqrt(ax[i] ** 2 + ax[j] ** 2 + ax[k] ** 2).max()) + math.sqrt(3.0) * grid.h


def apply_structure(D: StructureDecomposition, f_values: np.ndarray, f_grid: Grid3, out_points,
                    support_tol: float = 1e-12, carrier=None) -> np.ndarray:
    """Evaluate sum of atoms applied to f (sampled on f_grid, trilinear, zero outside).

    With a carrier wavevector k0, the envelope f exp(-i k0.x) is interpolated and the
    phase exp(i k0.y) is applied exactly, which removes most interpolation error for
    modulated packets.

    Since |S_w x + t w| >= t - |x|, atoms with t beyond the radius of supp f plus max |x|
    cannot see f and are skipped; samples below support_tol * max |f| count as zero.
    """
    if f_values.shape != f_grid.shape:
        raise DomainError("f samples do not match their grid")
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(out_points, dtype=float)))
    fv = np.asarray(f_values, dtype=complex)
    t_cut = _support_radius(fv, f_grid, support_tol) + float(np.max(np.linalg.norm(pts, axis=1), initial=0.0))
    Dt = D.truncated(t_cut)
    cells = np.zeros(len(Dt)) if Dt.t_cells is None else np.ascontiguousarray(Dt.t_cells, dtype=float)
    k0 = np.zeros(3) if carrier is None else np.asarray(carrier, dtype=float)
    if carrier is not None:
        fv = fv * np.exp(-1j * (f_grid.points() @ k0)).reshape(f_grid.shape)
    out_r = np.zeros(len(pts))
    out_i = np.zeros(len(pts))
    _apply_atoms(np.ascontiguousarray(fv.real), np.ascontiguousarray(fv.imag), float(-f_grid.extent),
                 float(f_grid.h), k0, pts, np.ascontiguousarray(Dt.omegas), np.ascontiguousarray(Dt.t), cells,
                 np.ascontiguousarray(Dt.coeff_minus, dtype=complex),
                 np.ascontiguousarray(Dt.coeff_plus, dtype=complex), np.ascontiguousarray(Dt.weights),
                 out_r, out_i)
    return out_r + 1j * out_i


# ---- kernel-route application of W+ and S -----------------------------------------------

def _lattice_indices(ps: PointSet, grid: Grid3) -> np.ndarray | None:
    """Flat indices of the point set on the grid, or None when the lattices differ."""
    if not math.isclose(ps.h, grid.h, rel_tol=1e-12):
        return None
    u = (ps.points + grid.extent) / grid.h
    iu = np.rint(u)
    if np.max(np.abs(u - iu), initial=0.0) > 1e-8 or np.any(iu < 0) or np.any(iu >= grid.n):
        return None
    iu = iu.astype(int)
    return np.ravel_multi_index((iu[:, 0], iu[:, 1], iu[:, 2]), grid.shape)


def _lattice_kernel(grid: Grid3, kind: str, k: float) -> np.ndarray:
    """Kernel on the doubled offset lattice: outgoing resolvent or the i sin(kr)/(2 pi r) difference."""
    n, h = grid.n, grid.h
    d = h * np.concatenate([np.arange(n), np.arange(-n, 0)])
    dx, dy, dz = np.meshgrid(d, d, d, indexing="ij", sparse=True)
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    r[0, 0, 0] = 1.0
    if kind == "outgoing":
        G = np.exp(1j * k * r) / (FOUR_PI * r)
        G[0, 0, 0] = self_cell_mean(k, h)
    else:
        G = 1j * np.sinc(k * r / math.pi) * k / (2.0 * math.pi)
    return G


def _direct_kernel(out_pts: np.ndarray, src: np.ndarray, h: float, kind: str, k: float) -> np.ndarray:
    if kind == "outgoing":
        return kernel_matrix(k, out_pts, src, h)
    from scipy.spatial.distance import cdist
    r = cdist(out_pts, src)
    return 1j * np.sinc(k * r / math.pi) * k / (2.0 * math.pi)


@functools.lru_cache(maxsize=80)
def _kernel_spectrum(n: int, h: float, kind: str, k: float) -> np.ndarray:
    return fft.fftn(_lattice_kernel(Grid3(n * h / 2.0, n), kind, k))


def _sum_over_radii(q: np.ndarray, radii: np.ndarray, ps: PointSet, grid: Grid3, kind: str) -> np.ndarray:
    """sum over radii k of sum over x1 of q[k, x1] G_k(x1, x) for x on the grid."""
    idx = _lattice_indices(ps, grid)
    if idx is not None:
        n = grid.n
        acc = np.zeros((2 * n,) * 3, dtype=complex)
        cache = (2 * n) ** 3 <= 128 ** 3
        for qk, k in zip(q, radii):
            pad = np.zeros((2 * n,) * 3, dtype=complex)
            vals = np.zeros(grid.size, dtype=complex)
            vals[idx] = qk
            pad[:n, :n, :n] = vals.reshape(grid.shape)
            if cache:
                Gh = _kernel_spectrum(n, float(grid.h), kind, float(k))
            else:
                Gh = fft.fftn(_lattice_kernel(grid, kind, float(k)))
            acc += fft.fftn(pad) * Gh
        return fft.ifftn(acc)[:n, :n, :n]
    out = np.zeros(grid.size, dtype=complex)
    pts = grid.points()
    for s in range(0, grid.size, 4096):
        for qk, k in zip(q, radii):
            out[s:s + 4096] += _direct_kernel(pts[s:s + 4096], ps.points, ps.h, kind, float(k)) @ qk
    return out.reshape(grid.shape)


def _fourier_weights(family: EtaKernelFamily, f) -> np.ndarray:
    return family.eta_grid.weights * f.fourier(family.eta_grid.points)


def band_loss(family: EtaKernelFamily, f) -> float:
    """Fraction of ||f||^2 not captured by the eta quadrature of a family (Plancherel)."""
    return band_loss_on(family.eta_grid, f)


def band_loss_on(eta_grid: EtaGrid, f) -> float:
    captured = float(eta_grid.weights @ np.abs(f.fourier(eta_grid.points)) ** 2) / (2 * math.pi) ** 3
    total = f.l2_norm() ** 2
    return abs(1.0 - captured / total)


def _head_sources(family: EtaKernelFamily, f) -> np.ndarray:
    """q[k, x1] = v(x1) * sum_x0 b_k(x0) w(x0) P_k[x0, x1] with b_k(x0) = sum of w f^ exp(i x0.eta)."""
    if not family.structured or family.head is None:
        raise DomainError("kernel-route application needs a structured family with a stored inverse")
    ps, eg = family.point_set, family.eta_grid
    F = _fourier_weights(family, f)
    q = np.zeros((len(eg.radii), len(ps)), dtype=complex)
    for j in range(len(eg.radii)):
        sel = eg.radius_index == j
        b = np.exp(1j * (ps.points @ eg.points[sel].T)) @ F[sel]
        q[j] = ((b * ps.weights) @ family.head[j]) * ps.values
    return q


def apply_wave(family: EtaKernelFamily, f, grid: Grid3, band_tol: float = 1e-3) -> np.ndarray:
    """W+ f on a grid from a T+ family (invert_family output).

    W+ f = f - (2 pi)^-3 sum_k sum_x1 q_k(x1) R0(k^2 + i0)(x1, x), where q_k collects
    the incoming waves of radius k propagated through (I + T1)^-1 and multiplied by V.
    """
    if family.kind != "tplus":
        raise DomainError("apply_wave expects the T+ family returned by invert_family")
    loss = band_loss(family, f)
    if loss > band_tol:
        raise BandLimitError(f"eta grid captures only {1 - loss:.4f} of ||f||^2")
    q = _head_sources(family, f)
    corr = _sum_over_radii(q, family.eta_grid.radii, family.point_set, grid, "outgoing")
    return f.sample(grid) - corr / (2.0 * math.pi) ** 3


def apply_wave_many(V: Potential, eta_grid: EtaGrid, ps: PointSet, functions, grid: Grid3,
                    band_tol: float = 1e-3, cond_cap: float = 1e12) -> list[np.ndarray]:
    """W+ f for several f, built one radius at a time.

    Same sum as apply_wave, but each core of T1 is assembled, inverted, and applied to
    every f before moving on, so memory holds one core instead of the whole family.
    The point set must lie on the output lattice.
    """
    idx = _lattice_indices(ps, grid)
    if idx is None:
        raise DomainError("the point set must lie on the output lattice")
    functions = list(functions)
    for f in functions:
        loss = band_loss_on(eta_grid, f)
        if loss > band_tol:
            raise BandLimitError(f"eta grid captures only {1 - loss:.4f} of ||f||^2")
    F = [eta_grid.weights * f.fourier(eta_grid.points) for f in functions]
    n = grid.n
    acc = [np.zeros((2 * n,) * 3, dtype=complex) for _ in functions]
    eye = np.eye(len(ps))
    for j, k in enumerate(eta_grid.radii):
        if not len(ps):
            break
        core = t1_cores(ps, [k], +1)[0]
        A = eye + core
        head = np.linalg.solve(A, eye)
        cond = np.linalg.norm(A, 1) * np.linalg.norm(head, 1)
        sel = eta_grid.radius_index == j
        if not np.isfinite(cond) or cond > cond_cap:
            raise SingularFamilyError("I + T1 is singular", eta_grid.points[sel][0])
        E = np.exp(1j * (ps.points @ eta_grid.points[sel].T))
        Gh = fft.fftn(_lattice_kernel(grid, "outgoing", float(k)))
        for a, Ff in zip(acc, F):
            q = (((E @ Ff[sel]) * ps.weights) @ head) * ps.values
            vals = np.zeros(grid.size, dtype=complex)
            vals[idx] = q
            pad = np.zeros((2 * n,) * 3, dtype=complex)
            pad[:n, :n, :n] = vals.reshape(grid.shape)
            a += fft.fftn(pad) * Gh
    return [f.sample(grid) - fft.ifftn(a)[:n, :n, :n] / (2.0 * math.pi) ** 3 for f, a in zip(functions, acc)]


def apply_scattering(family: EtaKernelFamily, f, grid: Grid3, band_tol: float = 1e-3) -> np.ndarray:
    """S f (or S^* f for adjoint families) on a grid from a scattering family.

    S f = f - (2 pi)^-3 sum_k sum_x1 q_k(x1) D_k(x1, x), where D_k = i sin(k r) / (2 pi r)
    is the jump of the free resolvent across the positive axis.
    """
    if family.kind not in ("ts", "ts_adjoint"):
        raise DomainError("apply_scattering expects a family from scattering_family")
    loss = band_loss(family, f)
    if loss > band_tol:
        raise BandLimitError(f"eta grid captures only {1 - loss:.4f} of ||f||^2")
    q = _head_sources(family, f)
    corr = _sum_over_radii(q, family.eta_grid.radii, family.point_set, grid, "jump")
    sign = 1.0 if family.kind == "ts_adjoint" else -1.0
    return f.sample(grid) + sign * corr / (2.0 * math.pi) ** 3


@dataclass(frozen=True)
class LeakageReport:
    fourier_pairing: float     # |<S f, g>| / (||f|| ||g||) with g paired on the Fourier side
    grid_pairing: float        # same pairing evaluated by grid quadrature
    f_norm: float
    g_norm: float


def annulus_leakage(family: EtaKernelFamily, f, g, grid: Grid3) -> LeakageReport:
    """Cross pairing <S f, g> for f, g with disjoint frequency annuli.

    S commutes with the free Hamiltonian, so the pairing vanishes. The Fourier-side
    value uses ∫ D_k(x1, x) conj(g(x)) dx = (i k / 8 pi^2) ∫ exp(-i k nu.x1) conj(g^(k nu)) dnu.
    """
    ps, eg = family.point_set, family.eta_grid
    q = _head_sources(family, f)
    sign = 1.0 if family.kind == "ts_adjoint" else -1.0
    nu, wn = sphere_rule(59)
    base = complex(eg.weights @ (f.fourier(eg.points) * np.conj(g.fourier(eg.points)))) / (2 * math.pi) ** 3
    cross = 0.0j
    for j, k in enumerate(eg.radii):
        gk = np.conj(g.fourier(k * nu))
        proj = (np.exp(-1j * k * (ps.points @ nu.T)) @ (wn * gk)) * (1j * k / (8.0 * math.pi ** 2))
        cross += q[j] @ proj
    four = base + sign * cross / (2 * math.pi) ** 3
    Sf = apply_scattering(family, f, grid, band_tol=1.0)
    gv = g.sample(grid)
    grid_val = grid.inner(Sf, gv)
    scale = f.l2_norm() * g.l2_norm()
    return LeakageReport(abs(four) / scale, abs(grid_val) / scale, f.l2_norm(), g.l2_norm())
