"""Free and perturbed resolvent kernels on point sets, zero-energy diagnostics, bound states.

Resolvent kernels are parametrized by the root lam of the energy: R0(lam^2)(x, y) =
exp(i lam |x - y|) / (4 pi |x - y|) with Im lam >= 0. Operator matrices carry the
quadrature weight of the input point in each column, so applying an operator to
samples is a plain matrix-vector product.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.fft import dstn, idstn
from scipy.sparse.linalg import LinearOperator, lobpcg
from scipy.spatial.distance import cdist

from .errors import DomainError, NearEigenvalueError, ResolutionError, SingularityError
from .grids import Grid3, read_grid_file, write_grid_file
from .potential_lab import Potential

FOUR_PI = 4.0 * math.pi


def free_resolvent_kernel(lam: complex, x, y):
    """exp(i lam r) / (4 pi r) with r = |x - y|; arrays broadcast over leading axes."""
    if np.imag(lam) < 0:
        raise DomainError("the free resolvent kernel needs Im lam >= 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(x - y, axis=-1)
    if np.any(r == 0.0):
        raise SingularityError("free resolvent kernel evaluated on the diagonal")
    out = np.exp(1j * lam * r) / (FOUR_PI * r)
    return out if lam != 0 else out.real


def ball_radius(h: float) -> float:
    """Radius of the ball whose volume equals a cubic cell of side h."""
    return (3.0 / FOUR_PI) ** (1.0 / 3.0) * h


def self_cell_mean(lam: complex, h: float) -> complex:
    """Mean of exp(i lam r)/(4 pi r) over a ball of volume h^3 centered at the singularity.

    Equals (1/h^3) * integral over (0, a) of r exp(i lam r) dr.
    """
    a = ball_radius(h)
    z = 1j * lam * a
    if abs(z) < 1e-3:
        # sum_n z^n / (n! (n + 2)) times a^2
        s = sum(z ** n / (math.factorial(n) * (n + 2)) for n in range(8))
    else:
        s = (np.exp(z) * (z - 1.0) + 1.0) / (z * z)
    return complex(a * a * s / h ** 3)


def kernel_matrix(lam: complex, out_points, in_points, h: float | None = None,
                  diag_tol: float = 1e-12) -> np.ndarray:
    """Kernel values R0(lam^2)(x_i, y_j) with coincident points replaced by the self-cell mean."""
    r = cdist(np.atleast_2d(out_points), np.atleast_2d(in_points))
    coincide = r <= diag_tol * (h or 1.0)
    if np.any(coincide) and h is None:
        raise SingularityError("coincident points need a cell size for the diagonal rule")
    r_safe = np.where(coincide, 1.0, r)
    if lam == 0:
        K = 1.0 / (FOUR_PI * r_safe)
    else:
        K = np.exp(1j * lam * r_safe) / (FOUR_PI * r_safe)
    if np.any(coincide):
        K = np.where(coincide, self_cell_mean(lam, h) if lam != 0 else self_cell_mean(0.0, h).real, K)
    return K


@dataclass(frozen=True, eq=False)
class PointSet:
    """Sample points with cubature weights, the cell size used for the diagonal rule,
    and potential values (cell averages) at the points."""

    points: np.ndarray
    weights: np.ndarray
    h: float
    values: np.ndarray | None = None
    indices: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)

    def digest(self) -> str:
        import hashlib
        hsh = hashlib.sha256(np.ascontiguousarray(self.points).tobytes())
        hsh.update(np.ascontiguousarray(self.weights).tobytes())
        return hsh.hexdigest()[:16]


def _needs_subsampling(V: Potential) -> bool:
    leaves = V.terms if V.kind == "sum" else (V,)
    return any(t.kind == "square_well" for t in leaves)


def cell_averages(V: Potential, points: np.ndarray, h: float, subsamples: int) -> np.ndarray:
    """Average of V over the cube of side h around each point (midpoint rule, m^3 samples)."""
    if subsamples <= 1:
        return V(points)
    m = subsamples
    off = (np.arange(m) + 0.5) / m - 0.5
    ox, oy, oz = np.meshgrid(off, off, off, indexing="ij")
    offsets = h * np.stack([ox.ravel(), oy.ravel(), oz.ravel()], axis=1)
    out = np.zeros(len(points))
    for chunk in range(0, len(points), 4096):
        p = points[chunk:chunk + 4096]
        out[chunk:chunk + 4096] = V(p[:, None, :] + offsets[None, :, :]).mean(axis=1)
    return out


def grid_values(V: Potential, grid: Grid3, subsamples: int | None = None) -> np.ndarray:
    """Potential on the whole grid, cell-averaged where V has jumps."""
    if subsamples is None:
        subsamples = 4 if _needs_subsampling(V) else 1
    return cell_averages(V, grid.points(), grid.h, subsamples).reshape(grid.shape)


def support_points(V: Potential, grid: Grid3, rel_threshold: float = 1e-12,
                   subsamples: int | None = None) -> PointSet:
    """Grid points where the cell-averaged |V| exceeds rel_threshold * max |V|."""
    vals = grid_values(V, grid, subsamples).ravel()
    peak = float(np.max(np.abs(vals), initial=0.0))
    if peak == 0.0:
        idx = np.zeros(0, dtype=int)
    else:
        idx = np.nonzero(np.abs(vals) > rel_threshold * peak)[0]
    pts = grid.points()[idx]
    return PointSet(pts, np.full(len(idx), grid.cell_volume), grid.h, vals[idx], idx)


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Dense operator on a point set. Rows are outputs, columns inputs, weights folded in."""

    points: np.ndarray
    weights: np.ndarray
    entries: np.ndarray
    eta: np.ndarray | None = None
    diagonal: str = "ball-mean"

    def __post_init__(self):
        n = len(self.points)
        if self.entries.shape != (n, n):
            raise DomainError("kernel operators must be square over their point set")

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.entries @ vec

    def kernel(self) -> np.ndarray:
        """Entries with the column weights removed."""
        return self.entries / self.weights[None, :]

    def save(self, path: str | Path) -> None:
        path = Path(path)
        write_grid_file(path, self.entries.astype(complex)[:, :, None], (0.0, 0.0, 0.0))
        meta = {"points": self.points.tolist(), "weights": self.weights.tolist(),
                "eta": None if self.eta is None else [float(v) for v in self.eta],
                "diagonal": self.diagonal}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "KernelOperator":
        path = Path(path)
        vals, _ = read_grid_file(path)
        meta = json.loads(path.with_suffix(path.suffix + ".json").read_text(encoding="utf-8"))
        eta = None if meta["eta"] is None else np.array(meta["eta"])
        return cls(np.array(meta["points"]), np.array(meta["weights"]), vals[:, :, 0].astype(complex),
                   eta, meta["diagonal"])


def _check_resolution(lam: complex, h: float) -> None:
    k = abs(np.real(lam))
    if k > 0 and h > (2.0 * math.pi / k) / 4.0:
        raise ResolutionError(
            f"spacing {h:.3g} gives fewer than 4 points per wavelength at lam = {lam}")


def _as_point_set(where, weights=None) -> PointSet:
    if isinstance(where, PointSet):
        return where
    if isinstance(where, Grid3):
        return PointSet(where.points(), where.weights(), where.h)
    raise DomainError("expected a Grid3 or a PointSet")


def assemble_free_resolvent(lam: complex, where, max_points: int = 20000) -> KernelOperator:
    """Nystrom matrix of R0(lam^2) on a grid or point set with the ball-mean diagonal."""
    if np.imag(lam) < 0:
        raise DomainError("assemble_free_resolvent needs Im lam >= 0")
    ps = _as_point_set(where)
    _check_resolution(lam, ps.h)
    if len(ps) > max_points:
        raise DomainError(f"{len(ps)} points exceed the dense cap of {max_points}; "
                          "use apply_free_resolvent for full grids")
    K = kernel_matrix(lam, ps.points, ps.points, ps.h)
    return KernelOperator(ps.points, ps.weights, (K * ps.weights[None, :]).astype(complex))


def apply_free_resolvent(lam: complex, grid: Grid3, values: np.ndarray) -> np.ndarray:
    """The same Nystrom sum as assemble_free_resolvent on a full grid, by FFT convolution."""
    if np.imag(lam) < 0:
        raise DomainError("apply_free_resolvent needs Im lam >= 0")
    _check_resolution(lam, grid.h)
    n, h = grid.n, grid.h
    d = h * np.concatenate([np.arange(n), np.arange(-n, 0)])
    dx, dy, dz = np.meshgrid(d, d, d, indexing="ij", sparse=True)
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    r[0, 0, 0] = 1.0
    G = np.exp(1j * lam * r) / (FOUR_PI * r)
    G[0, 0, 0] = self_cell_mean(lam, h)
    pad = np.zeros((2 * n,) * 3, dtype=complex)
    pad[:n, :n, :n] = values
    out = np.fft.ifftn(np.fft.fftn(pad) * np.fft.fftn(G))[:n, :n, :n] * grid.cell_volume
    return out


# ---- zero-energy diagnosis -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralDiagnosis:
    min_singular_value: float
    coarse_singular_value: float
    verdict: str
    bound_states: list = field(default_factory=list)
    resolution_margin: float = 1.0
    threshold: float = 1e-3
    n_points: int = 0

    def to_json(self) -> dict:
        return {
            "min_singular_value": self.min_singular_value,
            "coarse_singular_value": self.coarse_singular_value,
            "verdict": self.verdict,
            "bound_state_energies": [float(e) for e, _ in self.bound_states],
            "resolution_margin": self.resolution_margin,
            "threshold": self.threshold,
            "n_points": self.n_points,
            "note": "singular values are Euclidean on the grid; the L-infinity statement is not certified",
        }


def zero_energy_matrix(ps: PointSet, lam: complex = 0.0) -> np.ndarray:
    """I + R0(lam^2) V on the point set, weights folded in."""
    K = kernel_matrix(lam, ps.points, ps.points, ps.h)
    return np.eye(len(ps)) + K * (ps.weights * ps.values)[None, :]


def min_singular_value(ps: PointSet, lam: complex = 0.0) -> float:
    if len(ps) == 0:
        return 1.0
    return float(sla.svdvals(zero_energy_matrix(ps, lam))[-1])


def zero_energy_check(V: Potential, grid: Grid3, threshold: float = 1e-3, rel_support: float = 1e-12,
                      with_bound_states: bool = True, bound_grid: Grid3 | None = None) -> SpectralDiagnosis:
    """Smallest singular value of I + R0(0) V at grid spacing h and 2h, and a verdict."""
    fine = support_points(V, grid, rel_support)
    coarse = support_points(V, Grid3(grid.extent, grid.n // 2), rel_support)
    s_fine = min_singular_value(fine)
    s_coarse = min_singular_value(coarse)
    lo, hi = sorted((s_fine, s_coarse))
    margin = hi / lo if lo > 0 else math.inf
    if s_fine > threshold * margin:
        verdict = "generic"
    elif margin > 4.0:
        verdict = "inconclusive"
    else:
        verdict = "eigenvalue_or_resonance"
    states = bound_states(V, bound_grid or grid) if with_bound_states else []
    return SpectralDiagnosis(s_fine, s_coarse, verdict, states, margin, threshold, len(fine))


def birman_schwinger_couplings(V_unit: Potential, grid: Grid3, count: int = 1,
                               rel_support: float = 1e-12) -> list[float]:
    """Couplings c where I + c R0(0) V_unit is singular on the grid, for sign-definite V_unit.

    With V_unit = -|V_unit|, singularity of I + c R0 V_unit is equivalent to
    1/c being an eigenvalue of |V|^(1/2) R0 |V|^(1/2) (weights folded symmetrically).
    """
    ps = support_points(V_unit, grid, rel_support)
    v = ps.values
    if np.all(v <= 0):
        sign = -1.0
    elif np.all(v >= 0):
        sign = 1.0
    else:
        raise DomainError("the Birman-Schwinger scan needs a sign-definite potential")
    root = np.sqrt(np.abs(v) * ps.weights)
    K = kernel_matrix(0.0, ps.points, ps.points, ps.h)
    mu = sla.eigvalsh(root[:, None] * K * root[None, :])
    # I + c sign |V| R0 singular when c sign mu = -1
    cs = sorted(-1.0 / (sign * m) for m in mu if -1.0 / (sign * m) > 0)
    return cs[:count]


# ---- perturbed resolvent -----------------------------------------------------------------

def perturbed_resolvent(V: Potential, lam: complex, where, cond_cap: float = 1e12,
                        rel_support: float = 1e-12) -> KernelOperator:
    """R_V(lam^2) = (I + R0 V)^-1 R0 on the support of V."""
    ps = where if isinstance(where, PointSet) else support_points(V, where, rel_support)
    _check_resolution(lam, ps.h)
    K = kernel_matrix(lam, ps.points, ps.points, ps.h) * ps.weights[None, :]
    M = np.eye(len(ps)) + K * ps.values[None, :]
    if not len(ps):
        return KernelOperator(ps.points, ps.weights, K.astype(complex))
    inv = np.linalg.solve(M, np.eye(len(ps)))
    cond = np.linalg.norm(M, 1) * np.linalg.norm(inv, 1)
    if not np.isfinite(cond) or cond > cond_cap:
        raise NearEigenvalueError("I + R0 V is ill-conditioned", cond)
    return KernelOperator(ps.points, ps.weights, inv @ K)


# ---- bound states ---------------------------------------------------------------------

def _laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h ** 2)
    off = np.full(n - 1, -1.0 / h ** 2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def discrete_hamiltonian(V: Potential, grid: Grid3) -> tuple[sp.csr_matrix, np.ndarray]:
    """Seven-point -Laplacian with Dirichlet walls plus cell-averaged V."""
    n = grid.n
    D = _laplacian_1d(n, grid.h)
    I = sp.identity(n, format="csr")
    lap = sp.kron(sp.kron(D, I), I) + sp.kron(sp.kron(I, D), I) + sp.kron(sp.kron(I, I), D)
    v = grid_values(V, grid).ravel()
    return (lap + sp.diags(v)).tocsr(), v


def bound_states(V: Potential, grid: Grid3, max_states: int = 4, cutoff: float = 1e-6,
                 seed: int = 0) -> list[tuple[float, np.ndarray]]:
    """Negative eigenvalues of the discrete Hamiltonian with grid-normalized eigenvectors.

    Energies above -cutoff are treated as threshold artifacts and dropped.
    """
    H, v = discrete_hamiltonian(V, grid)
    if v.min(initial=0.0) >= 0.0:
        return []
    N = H.shape[0]
    if N <= 4096:
        w, X = np.linalg.eigh(H.toarray())
        k = min(max_states, N)
        w, X = w[:k], X[:, :k]
    else:
        w, X = _lobpcg_lowest(H, grid, v, max_states, seed)
    out = []
    for e, x in zip(w, X.T):
        if e < -cutoff:
            x = x / math.sqrt(float(np.vdot(x, x).real) * grid.cell_volume)
            # fix the sign so the largest entry is positive
            x = x * np.sign(x[np.argmax(np.abs(x))])
            out.append((float(e), x.reshape(grid.shape)))
    return out


def _lobpcg_lowest(H, grid: Grid3, v: np.ndarray, k: int, seed: int):
    n, h = grid.n, grid.h
    j = np.arange(1, n + 1)
    lam1 = (2.0 - 2.0 * np.cos(np.pi * j / (n + 1))) / h ** 2
    shift = max(1.0, -float(v.min()))
    denom = lam1[:, None, None] + lam1[None, :, None] + lam1[None, None, :] + shift

    def precond(x):
        x = np.asarray(x)
        cols = x.reshape(n, n, n, -1)
        out = np.empty_like(cols)
        for c in range(cols.shape[-1]):
            out[..., c] = idstn(dstn(cols[..., c], type=1) / denom, type=1)
        return out.reshape(x.shape)

    P = LinearOperator(H.shape, matvec=precond, matmat=precond, dtype=float)
    # smooth localized start vectors: a Gaussian envelope times low-order monomials
    pts = grid.points()
    env = np.exp(-np.sum(pts ** 2, axis=1) / (0.25 * grid.extent) ** 2)
    cols = [env, env * pts[:, 0], env * pts[:, 1], env * pts[:, 2],
            env * (pts[:, 0] ** 2 - pts[:, 1] ** 2), env * pts[:, 0] * pts[:, 1],
            env * pts[:, 1] * pts[:, 2], env * pts[:, 0] * pts[:, 2]]
    rng = np.random.default_rng(seed)
    while len(cols) < k:
        cols.append(env * rng.standard_normal(len(env)))
    X0 = np.stack(cols[:k], axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        w, X = lobpcg(H, X0, M=P, largest=False, tol=1e-7, maxiter=200)
    order = np.argsort(w)
    return w[order], X[:, order]


def agmon_decay_rate(state: np.ndarray, grid: Grid3, r_min: float) -> float:
    """Slope c of a fit log|f| ~ a - c r over grid points with r_min < r < 0.8 extent."""
    r = grid.radius().ravel()
    f = np.abs(state).ravel()
    mask = (r > r_min) & (r < 0.8 * grid.extent) & (f > 0)
    if mask.sum() < 8:
        raise DomainError("too few points in the tail window")
    slope, _ = np.polyfit(r[mask], np.log(f[mask]), 1)
    return float(-slope)
