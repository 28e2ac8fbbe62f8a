"""Per-frequency kernel families and their composition algebra.

A family assigns to each frequency eta a dense kernel T(x0, x1, eta) on a fixed point
set. Matrices are stored in kernel orientation (row x0, column x1) with the
quadrature weight of x1 folded into the column, so the composition

    (A o B)(x0, x2, eta) = sum over x1 of A(x0, x1, eta) w(x1) B(x1, x2, eta)

is a plain matrix product. In operator language the kernel K acts by
(K f)(x1) = integral of f(x0) K(x0, x1) dx0, so A o B corresponds to applying A first.

Families built from resolvent kernels have the form

    T(x0, x1, eta) = exp(i x0.eta) K_|eta|(x0, x1) exp(-i x1.eta)

and are stored as one core K per distinct |eta|. Composition, sums, and inversion act on
cores, and the phase conjugation is unitary, so norms and residuals computed on
cores equal the per-eta values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, DivergenceError, DomainError, GrowthError, SingularFamilyError
from .grids import gauss_legendre, sphere_rule, trapezoid_weights, write_grid_file
from .greens import KernelOperator, PointSet, kernel_matrix, support_points
from .potential_lab import Potential

_RADIUS_DECIMALS = 12


@dataclass(frozen=True, eq=False)
class EtaGrid:
    """Frequencies with cubature weights for integrals over R^3 (weights include |eta|^2)."""

    points: np.ndarray
    weights: np.ndarray
    radii: np.ndarray
    radius_index: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_points(cls, points, weights=None) -> "EtaGrid":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
        r = np.round(np.linalg.norm(pts, axis=1), _RADIUS_DECIMALS)
        radii, idx = np.unique(r, return_inverse=True)
        return cls(pts, w, radii, idx)

    @classmethod
    def product(cls, radii, radial_weights, sphere_order: int = 17) -> "EtaGrid":
        """Radii x sphere rule; weights are radial_weight * k^2 * sphere_weight."""
        radii = np.asarray(radii, dtype=float)
        rw = np.asarray(radial_weights, dtype=float)
        nodes, sw = sphere_rule(sphere_order)
        pts = (radii[:, None, None] * nodes[None, :, :]).reshape(-1, 3)
        w = ((rw * radii ** 2)[:, None] * sw[None, :]).ravel()
        idx = np.repeat(np.arange(len(radii)), len(nodes))
        return cls(pts, w, radii, idx)

    @classmethod
    def geometric(cls, n_radii: int = 24, k_min: float = 0.05, k_max: float = 20.0,
                  sphere_order: int = 17) -> "EtaGrid":
        """Default grid: geometric radii on [k_min, k_max] with trapezoid weights in k."""
        radii = np.geomspace(k_min, k_max, n_radii)
        return cls.product(radii, trapezoid_weights(radii), sphere_order)

    @classmethod
    def gauss(cls, k_max: float, n_radii: int, sphere_order: int, k_min: float = 0.0) -> "EtaGrid":
        """Gauss-Legendre radii on [k_min, k_max]; accurate for smooth integrands in eta."""
        r, w = gauss_legendre(k_min, k_max, n_radii)
        return cls.product(r, w, sphere_order)

    def same_as(self, other: "EtaGrid") -> bool:
        return self is other or (self.points.shape == other.points.shape
                                 and np.array_equal(self.points, other.points)
                                 and np.array_equal(self.weights, other.weights))

    def negation_index(self) -> np.ndarray:
        """Index j with points[j] = -points[i], for centrally symmetric grids."""
        from scipy.spatial import cKDTree
        tree = cKDTree(self.points)
        d, j = tree.query(-self.points)
        if np.max(d, initial=0.0) > 1e-9:
            raise DomainError("eta grid is not centrally symmetric")
        return j


@dataclass(frozen=True, eq=False)
class EtaKernelFamily:
    """Kernel family on an eta grid; see the module docstring for the storage layout."""

    eta_grid: EtaGrid
    point_set: PointSet
    sign: int
    eps: float = 0.0
    cores: np.ndarray | None = None
    mats: np.ndarray | None = None
    kind: str = "generic"
    head: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.cores is None) == (self.mats is None):
            raise DomainError("a family stores either per-radius cores or per-eta matrices")
        n = len(self.point_set)
        if self.cores is not None and self.cores.shape != (len(self.eta_grid.radii), n, n):
            raise DomainError("core stack does not match the eta grid radii and point set")
        if self.mats is not None and self.mats.shape != (len(self.eta_grid), n, n):
            raise DomainError("matrix stack does not match the eta grid and point set")

    @property
    def n_points(self) -> int:
        return len(self.point_set)

    @property
    def structured(self) -> bool:
        return self.cores is not None

    def phases(self, i: int) -> np.ndarray:
        return np.exp(1j * (self.point_set.points @ self.eta_grid.points[i]))

    def matrix(self, i: int) -> np.ndarray:
        """Weighted matrix of T(., ., eta_i)."""
        if self.mats is not None:
            return self.mats[i]
        e = self.phases(i)
        core = self.cores[self.eta_grid.radius_index[i]]
        return e[:, None] * core * e.conj()[None, :]

    def kernel(self, i: int) -> np.ndarray:
        """T(x0, x1, eta_i) without the column weights."""
        return self.matrix(i) / self.point_set.weights[None, :]

    def op(self, i: int) -> KernelOperator:
        """The eta_i slice as a KernelOperator (entries in kernel orientation)."""
        return KernelOperator(self.point_set.points, self.point_set.weights,
                              np.asarray(self.matrix(i), dtype=complex), eta=self.eta_grid.points[i],
                              diagonal="ball-mean")

    def blocks(self) -> np.ndarray:
        """Cores when structured, else per-eta matrices."""
        return self.cores if self.cores is not None else self.mats

    def with_blocks(self, blocks: np.ndarray, kind: str = "generic", head=None, sign=None, meta=None):
        if self.cores is not None:
            return replace(self, cores=blocks, mats=None, kind=kind, head=head,
                           sign=self.sign if sign is None else sign, meta=meta or {})
        return replace(self, cores=None, mats=blocks, kind=kind, head=head,
                       sign=self.sign if sign is None else sign, meta=meta or {})

    def explicit(self) -> "EtaKernelFamily":
        """Same family with one stored matrix per eta."""
        if self.mats is not None:
            return self
        mats = np.stack([self.matrix(i) for i in range(len(self.eta_grid))])
        return replace(self, cores=None, mats=mats, head=None)

    def __add__(self, other: "EtaKernelFamily") -> "EtaKernelFamily":
        a, b = _aligned(self, other, allow_mixed=True)
        sign = a.sign if a.sign == b.sign else 0
        return a.with_blocks(a.blocks() + b.blocks(), sign=sign)

    def __sub__(self, other: "EtaKernelFamily") -> "EtaKernelFamily":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "EtaKernelFamily":
        return self.with_blocks(self.blocks() * factor)

    def norms(self) -> np.ndarray:
        """Spectral norm of each stored block (per radius when structured)."""
        return np.array([np.linalg.norm(b, 2) for b in self.blocks()])

    def save(self, directory: str | Path) -> None:
        """One binary matrix file per eta plus a JSON manifest."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for i in range(len(self.eta_grid)):
            write_grid_file(d / f"eta_{i:05d}.bin", np.asarray(self.matrix(i), dtype=complex)[:, :, None],
                            (0.0, 0.0, 0.0))
        manifest = {
            "eta_points": self.eta_grid.points.tolist(),
            "eta_weights": self.eta_grid.weights.tolist(),
            "sign": self.sign,
            "eps": self.eps,
            "kind": self.kind,
            "point_set": self.point_set.digest(),
            "n_points": self.n_points,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")


def _aligned(A: EtaKernelFamily, B: EtaKernelFamily, allow_mixed: bool = False):
    if not A.eta_grid.same_as(B.eta_grid):
        raise ContractError("families live on different eta grids")
    if A.point_set is not B.point_set and (
            A.n_points != B.n_points or not np.array_equal(A.point_set.points, B.point_set.points)):
        raise ContractError("families live on different point sets")
    if not allow_mixed and A.sign != B.sign and 0 not in (A.sign, B.sign) and A.kind != "identity" \
            and B.kind != "identity":
        raise ContractError("families carry different branch signs")
    if A.structured != B.structured:
        return A.explicit(), B.explicit()
    return A, B


def ostar(A: EtaKernelFamily, B: EtaKernelFamily, allow_mixed: bool = False) -> EtaKernelFamily:
    """Composition A o B, per eta a weighted matrix product."""
    a, b = _aligned(A, B, allow_mixed)
    sign = a.sign if b.kind == "identity" else (b.sign if a.kind == "identity" else
                                                  (a.sign if a.sign == b.sign else 0))
    return a.with_blocks(np.matmul(a.blocks(), b.blocks()), sign=sign)


def identity_family(like: EtaKernelFamily) -> EtaKernelFamily:
    """Identity element: delta in x and in the translation variable."""
    n = like.n_points
    count = len(like.blocks())
    eye = np.broadcast_to(np.eye(n, dtype=complex), (count, n, n)).copy()
    return like.with_blocks(eye, kind="identity")


def zero_family(like: EtaKernelFamily) -> EtaKernelFamily:
    return like.with_blocks(np.zeros_like(like.blocks()))


def _branch_lambda(k: float, sign: int, eps: float) -> complex:
    """Root lam with Im lam >= 0 for the energy k^2 + i sign eps (eps = 0 gives +-k)."""
    if eps == 0.0:
        return complex(sign * k)
    lam = np.sqrt(complex(k * k, eps))
    return lam if sign > 0 else -lam.conjugate()


def t1_cores(ps: PointSet, radii, sign: int, eps: float = 0.0) -> np.ndarray:
    """Cores V(x0) R0(k^2 +- i eps)(x0, x1) w(x1) for each radius k."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    n = len(ps)
    out = np.empty((len(radii), n, n), dtype=complex)
    for j, k in enumerate(radii):
        K = kernel_matrix(_branch_lambda(float(k), sign, eps), ps.points, ps.points, ps.h)
        out[j] = ps.values[:, None] * K * ps.weights[None, :]
    return out


def t1_family(V: Potential, eta_grid: EtaGrid, sign: int, where=None, eps: float = 0.0,
              rel_support: float = 1e-12) -> EtaKernelFamily:
    """First Born kernel family on the support of V.

    Entries: exp(i x0.eta) V(x0) R0(|eta|^2 +- i eps)(x0, x1) exp(-i x1.eta).
    `where` is a Grid3 (support points are extracted) or a ready PointSet.
    """
    if where is None:
        raise DomainError("t1_family needs a grid or point set")
    ps = where if isinstance(where, PointSet) else support_points(V, where, rel_support)
    cores = t1_cores(ps, eta_grid.radii, sign, eps)
    return EtaKernelFamily(eta_grid, ps, sign, eps, cores=cores, kind="t1")


def extrapolate_eps(families: list[EtaKernelFamily], eps_sequence, levels: int | None = None):
    """Richardson extrapolation eps -> 0 over halving eps; returns (family, increments)."""
    eps = list(eps_sequence)
    if any(abs(b - a / 2) > 1e-12 * a for a, b in zip(eps, eps[1:])):
        raise DomainError("eps sequence must halve at every step")
    levels = len(families) - 1 if levels is None else levels
    table = np.stack([f.blocks() for f in families])
    inc = [float(np.max(np.abs(table[i + 1] - table[i]))) for i in range(len(families) - 1)]
    for j in range(1, levels + 1):
        table = (2.0 ** j * table[1:] - table[:-1]) / (2.0 ** j - 1.0)
    base = families[-1]
    return replace(base.with_blocks(table[-1], kind=base.kind), eps=0.0), inc


def born_term(V: Potential, n: int, eta_grid: EtaGrid, sign: int, where=None,
              t1: EtaKernelFamily | None = None) -> EtaKernelFamily:
    """n-fold composition power of the first Born family (raw power, no sign factor)."""
    if n < 1:
        raise DomainError("Born terms start at n = 1")
    T1 = t1 if t1 is not None else t1_family(V, eta_grid, sign, where)
    norms = T1.norms()
    worst = float(np.max(norms, initial=0.0))
    if worst > 0 and n * math.log(worst) > 700.0:
        raise GrowthError(f"Born term {n} overflows", worst)
    out = T1
    for _ in range(n - 1):
        out = ostar(out, T1)
    return out.with_blocks(out.blocks(), kind="t1" if n == 1 else f"born{n}")


def spectral_radii(T1: EtaKernelFamily) -> np.ndarray:
    return np.array([float(np.max(np.abs(np.linalg.eigvals(b)), initial=0.0)) for b in T1.blocks()])


def invert_family(T1: EtaKernelFamily, strategy: str = "direct", max_terms: int = 200,
                  tol: float = 1e-14, failover_radius: float = 0.9,
                  cond_cap: float = 1e12) -> EtaKernelFamily:
    """T+ with (I + T1) o (I - T+) = I per eta.

    strategy "neumann" sums sum_{k>=1} (-1)^(k-1) T1^k and fails over to the direct
    solve wherever the spectral radius reaches failover_radius; meta records where.
    """
    if strategy not in ("direct", "neumann"):
        raise DomainError("strategy must be 'direct' or 'neumann'")
    blocks = T1.blocks()
    n = T1.n_points
    eye = np.eye(n)
    heads = np.empty_like(blocks)
    used = []
    radii = np.full(len(blocks), np.nan)
    for j, M in enumerate(blocks):
        A = eye + M
        if strategy == "neumann":
            radii[j] = float(np.max(np.abs(np.linalg.eigvals(M)), initial=0.0))
            if radii[j] < failover_radius:
                heads[j] = _neumann_inverse(M, max_terms, tol)
                used.append("neumann")
                continue
        heads[j] = _checked_inverse(A, cond_cap, T1, j)
        used.append("direct")
    meta = {"strategy": strategy, "used": used}
    if strategy == "neumann":
        meta["spectral_radius"] = radii.tolist()
        meta["neumann_failed"] = [_block_label(T1, j) for j, u in enumerate(used) if u == "direct"]
    return T1.with_blocks(eye[None] - heads, kind="tplus", head=heads, meta=meta)


def _checked_inverse(A: np.ndarray, cond_cap: float, F: EtaKernelFamily, j: int) -> np.ndarray:
    """A^-1, raising when the 1-norm condition number exceeds cond_cap."""
    if not len(A):
        return A.copy()
    try:
        inv = np.linalg.solve(A, np.eye(len(A)))
    except np.linalg.LinAlgError:
        raise SingularFamilyError("I + T1 is singular", _block_eta(F, j)) from None
    cond = np.linalg.norm(A, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SingularFamilyError("I + T1 is singular", _block_eta(F, j))
    return inv


def _neumann_inverse(M: np.ndarray, max_terms: int, tol: float) -> np.ndarray:
    """(I + M)^-1 as sum_k (-M)^k; raises when the terms stop shrinking."""
    n = len(M)
    total = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for _ in range(max_terms):
        term = -(term @ M)
        total += term
        if np.linalg.norm(term) <= tol * np.linalg.norm(total):
            return total
    raise DivergenceError("Neumann series did not converge")


def neumann_partial_sums(M: np.ndarray, n_terms: int) -> np.ndarray:
    """Frobenius norms of the Neumann terms (-M)^k for k = 1..n_terms."""
    term = np.eye(len(M), dtype=complex)
    out = []
    for _ in range(n_terms):
        term = -(term @ M)
        out.append(float(np.linalg.norm(term)))
    return np.array(out)


def _block_eta(F: EtaKernelFamily, j: int) -> np.ndarray:
    if F.structured:
        i = int(np.nonzero(F.eta_grid.radius_index == j)[0][0])
        return F.eta_grid.points[i]
    return F.eta_grid.points[j]


def _block_label(F: EtaKernelFamily, j: int) -> float | list:
    if F.structured:
        return float(F.eta_grid.radii[j])
    return [float(v) for v in F.eta_grid.points[j]]


def inverse_residuals(T1: EtaKernelFamily, Tp: EtaKernelFamily) -> np.ndarray:
    """Per-eta spectral norm of (I + T1(eta))(I - T+(eta)) - I.

    For structured families the conjugating phases are unitary, so the value is the
    same for every eta on a radius; it is expanded to one entry per eta.
    """
    a, b = _aligned(T1, Tp)
    eye = np.eye(a.n_points)
    per_block = np.array([np.linalg.norm((eye + A) @ (eye - B) - eye, 2)
                          for A, B in zip(a.blocks(), b.blocks())])
    if a.structured:
        return per_block[a.eta_grid.radius_index]
    return per_block


def explicit_inverse_residual(T1: EtaKernelFamily, Tp: EtaKernelFamily, i: int) -> float:
    """Residual at one eta from materialized per-eta matrices (no core shortcut)."""
    eye = np.eye(T1.n_points)
    return float(np.linalg.norm((eye + T1.matrix(i)) @ (eye - Tp.matrix(i)) - eye, 2))


def scattering_family(V: Potential, eta_grid: EtaGrid, where=None, t1_plus=None, t1_minus=None,
                      rel_support: float = 1e-12, adjoint: bool = False) -> EtaKernelFamily:
    """Kernel family of S = W-^* W+ in the convention W+ = lim_{t->+inf} e^{-itH} e^{itH0}.

    T_S = I - (I + T1+)^-1 o (T1+ - T1-). With adjoint=True the family of S^* is
    returned instead, I + (I + T1-)^-1 o (T1+ - T1-).
    """
    if t1_plus is None:
        t1_plus = t1_family(V, eta_grid, +1, where, rel_support=rel_support)
    if t1_minus is None:
        t1_minus = t1_family(V, eta_grid, -1, t1_plus.point_set)
    plus, minus = t1_plus.blocks(), t1_minus.blocks()
    eye = np.eye(t1_plus.n_points)
    base = t1_plus if not adjoint else t1_minus
    heads = np.empty_like(plus)
    blocks = np.empty_like(plus)
    for j, M in enumerate(base.blocks()):
        heads[j] = _checked_inverse(eye + M, 1e12, base, j)
        prod = heads[j] @ (plus[j] - minus[j])
        blocks[j] = eye + prod if adjoint else eye - prod
    return t1_plus.with_blocks(blocks, kind="ts_adjoint" if adjoint else "ts", head=heads, sign=0,
                               meta={"adjoint": adjoint})


def pairing_error(plus: EtaKernelFamily, minus: EtaKernelFamily) -> float:
    """max |T+(eta) - conj(T-(-eta))| over the grid, relative to max |T+|."""
    neg = plus.eta_grid.negation_index()
    worst = 0.0
    scale = 0.0
    for i in range(len(plus.eta_grid)):
        a = plus.matrix(i)
        b = minus.matrix(neg[i]).conj()
        worst = max(worst, float(np.max(np.abs(a - b))))
        scale = max(scale, float(np.max(np.abs(a))))
    return worst / scale if scale else worst


def scattering_amplitude(V: Potential, k: float, omega_in, omega_out, where, rel_support: float = 1e-12,
                         coupling: float = 1.0) -> complex:
    """Amplitude -(1/4 pi) <e_out, cV psi> with psi = (I + R0(k^2 + i0) cV)^-1 e_in.

    With coupling c, the first-order term is -(c/4 pi) V^(k omega_out - k omega_in).
    """
    ps = where if isinstance(where, PointSet) else support_points(V, where, rel_support)
    v = coupling * ps.values
    e_in = np.exp(1j * k * (ps.points @ np.asarray(omega_in, dtype=float)))
    e_out = np.exp(1j * k * (ps.points @ np.asarray(omega_out, dtype=float)))
    A = np.eye(len(ps)) + kernel_matrix(complex(k), ps.points, ps.points, ps.h) * (ps.weights * v)[None, :]
    psi = np.linalg.solve(A, e_in)
    return complex(-(np.conj(e_out) * ps.weights * v) @ psi / (4.0 * math.pi))


def born_amplitude(V: Potential, k: float, omega_in, omega_out, where, rel_support: float = 1e-12,
                   coupling: float = 1e-3) -> complex:
    """First-order amplitude per unit coupling, extracted from the full solve at +-coupling."""
    ap = scattering_amplitude(V, k, omega_in, omega_out, where, rel_support, coupling)
    am = scattering_amplitude(V, k, omega_in, omega_out, where, rel_support, -coupling)
    return (ap - am) / (2.0 * coupling)


def neumann_divergence_coupling(V_unit: Potential, eta_grid: EtaGrid, where, rel_support: float = 1e-12) -> float:
    """Smallest coupling c at which the Neumann series for (I + c T1)^-1 stops converging.

    T1 is linear in V, so the spectral radius of c T1(eta) is c times that of T1(eta)
    and the onset is 1 / max over eta of the unit spectral radius.
    """
    T1 = t1_family(V_unit, eta_grid, +1, where, rel_support=rel_support)
    rho = float(np.max(spectral_radii(T1), initial=0.0))
    return math.inf if rho == 0.0 else 1.0 / rho
