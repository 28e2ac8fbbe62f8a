"""Half-line oscillatory ray integrals of V^ and their checks.

    L1(t w)  = integral over s in (0, inf)  of V^(s w) exp(-i t s / 2) s ds
    L1~(t w) = integral over s in (-inf, 0) of V^(s w) exp(-i t s / 2) s ds

Both integrals are only conditionally convergent for rough V, so they are computed
with a damping factor exp(-eps |s|) over a decreasing eps sequence and extrapolated
to eps = 0 with a Richardson table.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DivergenceError, DomainError
from .grids import default_t_grid, panel_gauss_legendre, sphere_rule, trapezoid_weights
from .potential_lab import Potential, fourier_on_ray, l2_norm, moment_l2_norm


@dataclass(frozen=True)
class RayQuadConfig:
    eps_sequence: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    richardson_levels: int = 3
    panel_order: int = 16
    points_per_period: int = 8
    decay_tol: float = 1e-14
    s_cap: float = 4000.0
    tolerance: float = 1e-3
    sphere_order: int = 17
    block: int = 8192

    def __post_init__(self):
        eps = self.eps_sequence
        if len(eps) < 2 or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
            raise DomainError("eps_sequence must be positive and strictly decreasing")
        if not 0 <= self.richardson_levels < len(eps):
            raise DomainError("richardson_levels must be below the number of eps values")


@dataclass(frozen=True, eq=False)
class RayProfile:
    """Samples of L1 and L1~ on a (direction, t) product grid."""

    omegas: np.ndarray
    omega_weights: np.ndarray
    t: np.ndarray
    t_weights: np.ndarray
    L1: np.ndarray
    L1_tilde: np.ndarray
    eps_sequence: tuple[float, ...]
    residual: float
    increments: tuple[float, ...]
    v_hat_zero: complex = 0.0
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (len(self.omegas), len(self.t))
        if self.L1.shape != shape or self.L1_tilde.shape != shape:
            raise DomainError("profile samples do not match the grid dimensions")
        if len(self.omega_weights) != len(self.omegas) or len(self.t_weights) != len(self.t):
            raise DomainError("quadrature weights do not match the grid dimensions")

    @property
    def radial(self) -> bool:
        return len(self.omegas) == 1

    def scaled(self, factor: complex) -> "RayProfile":
        return RayProfile(self.omegas, self.omega_weights, self.t, self.t_weights,
                          self.L1 * factor, self.L1_tilde * factor, self.eps_sequence,
                          self.residual * abs(factor), self.increments, self.v_hat_zero * factor,
                          self.label, dict(self.meta))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["omega_x", "omega_y", "omega_z", "t", "re_L1", "im_L1", "re_L1t", "im_L1t"])
            for i, om in enumerate(self.omegas):
                for j, tj in enumerate(self.t):
                    a, b = self.L1[i, j], self.L1_tilde[i, j]
                    w.writerow([repr(float(om[0])), repr(float(om[1])), repr(float(om[2])), repr(float(tj)),
                                repr(a.real), repr(a.imag), repr(b.real), repr(b.imag)])

    def metadata(self) -> dict:
        return {
            "label": self.label,
            "n_omega": int(len(self.omegas)),
            "omega_weights": [float(w) for w in self.omega_weights],
            "t": [float(v) for v in self.t],
            "t_weights": [float(v) for v in self.t_weights],
            "eps_sequence": list(self.eps_sequence),
            "residual": float(self.residual),
            "increments": list(self.increments),
            **self.meta,
        }

    def write(self, csv_path: str | Path) -> None:
        """CSV samples plus a JSON metadata sidecar next to it."""
        self.to_csv(csv_path)
        Path(str(csv_path) + ".json").write_text(json.dumps(self.metadata(), indent=2, sort_keys=True),
                                                 encoding="utf-8")


def _feature_scale(V: Potential) -> float:
    """Spatial radius that controls the oscillation of V^ along rays."""
    leaves = V.terms if V.kind == "sum" else (V,)
    scale = 1.0
    for p in leaves:
        c = float(np.linalg.norm(p.center))
        if p.kind == "gaussian":
            r = 3.0 * p.param("width")
        elif p.kind == "square_well":
            r = p.param("radius")
        elif p.kind == "yukawa":
            r = p.param("core") + 3.0 / p.param("mass")
        else:
            r = p.grid.extent * math.sqrt(3.0)
        scale = max(scale, c + r)
    return scale


def _s_limit(V: Potential, omega: np.ndarray, cfg: RayQuadConfig) -> float:
    """Largest s that matters once damping by the smallest eps is applied."""
    cap = cfg.s_cap
    if V.kind == "sampled" or any(t.kind == "sampled" for t in (V.terms if V.kind == "sum" else ())):
        grids = [t.grid for t in (V.terms if V.kind == "sum" else (V,)) if t.kind == "sampled"]
        # fourier() accepts |s w_i| up to the last padded frequency below Nyquist
        kmax = min(g.nyquist * (1.0 - 1.0 / g.n) for g in grids)
        cap = min(cap, kmax / np.max(np.abs(omega)))
    probe = np.linspace(0.0, cap, 40001)
    vals = np.abs(fourier_on_ray(V, omega, probe))
    vals = np.maximum(vals, np.abs(fourier_on_ray(V, omega, -probe)))
    peak = float(vals.max())
    if peak == 0.0:
        return 0.0
    tail = vals[probe > 0.75 * cap]
    if V.kind != "sampled" and tail.size and tail.max() > 1e-3 * peak:
        raise DivergenceError(f"V^ does not decay along the ray (|V^| at s={cap:g} is "
                              f"{tail.max() / peak:.2e} of its peak)")
    envelope = vals * probe * np.exp(-cfg.eps_sequence[-1] * probe)
    big = np.nonzero(envelope > cfg.decay_tol * envelope.max())[0]
    return float(min(probe[big[-1]] * 1.05 + 1.0, cap))


def _ray_nodes(s_max: float, t_max: float, feature: float, cfg: RayQuadConfig):
    # phase exp(-i t s/2) plus oscillation of V^ at rate `feature`
    rate = 0.5 * t_max + feature
    period = 2.0 * math.pi / rate
    length = min(1.0, period * cfg.panel_order / cfg.points_per_period)
    n_panels = max(1, int(math.ceil(s_max / length)))
    return panel_gauss_legendre(np.linspace(0.0, s_max, n_panels + 1), cfg.panel_order)


def _richardson(values: np.ndarray, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """values[k] at eps_k = eps_0 / 2^k. Returns (extrapolated, previous-level estimate)."""
    table = values
    prev = values[-1]
    for j in range(1, levels + 1):
        prev = table[-1]
        table = (2.0 ** j * table[1:] - table[:-1]) / (2.0 ** j - 1.0)
    return table[-1], prev


def _halving(eps: tuple[float, ...]) -> bool:
    return all(abs(b - a / 2.0) <= 1e-12 * a for a, b in zip(eps, eps[1:]))


def _ray_values(V: Potential, omega: np.ndarray, t: np.ndarray, cfg: RayQuadConfig, feature: float):
    """Damped L1 and L1~ at every eps, shape (n_eps, n_t)."""
    n_eps = len(cfg.eps_sequence)
    s_max = _s_limit(V, omega, cfg)
    if s_max == 0.0:
        z = np.zeros((n_eps, len(t)), dtype=complex)
        return z, z.copy()
    s, w = _ray_nodes(s_max, float(t.max(initial=0.0)), feature, cfg)
    damp = np.exp(-np.outer(s, cfg.eps_sequence))
    g_plus = (fourier_on_ray(V, omega, s) * s * w)[:, None] * damp
    # L1~ with s -> -s: integral over (0, inf) of V^(-s w) exp(+i t s/2) (-s) ds
    g_minus = (fourier_on_ray(V, omega, -s) * (-s) * w)[:, None] * damp
    L = np.zeros((len(t), n_eps), dtype=complex)
    Lt = np.zeros((len(t), n_eps), dtype=complex)
    for a in range(0, len(s), cfg.block):
        sl = slice(a, a + cfg.block)
        E = np.exp(-0.5j * np.outer(t, s[sl]))
        L += E @ g_plus[sl]
        Lt += E.conj() @ g_minus[sl]
    return L.T, Lt.T


def default_omega_grid(V: Potential, order: int = 17) -> tuple[np.ndarray, np.ndarray]:
    """A single direction carrying the full sphere weight for radial V, else a Lebedev rule."""
    if V.radial:
        return np.array([[0.0, 0.0, 1.0]]), np.array([4.0 * math.pi])
    return sphere_rule(order)


def compute_l1(V: Potential, omega_grid=None, t_grid=None, quad: RayQuadConfig | None = None,
               check: bool = True) -> RayProfile:
    """Sample L1 and L1~ on a direction x time grid.

    omega_grid is (nodes, weights); t_grid is either an array of nodes (trapezoid
    weights are used) or a (nodes, weights) pair.
    """
    cfg = quad or RayQuadConfig()
    omegas, w_omega = omega_grid if omega_grid is not None else default_omega_grid(V, cfg.sphere_order)
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    w_omega = np.asarray(w_omega, dtype=float)
    if t_grid is None:
        t, w_t = default_t_grid()
    elif isinstance(t_grid, tuple):
        t, w_t = (np.asarray(a, dtype=float) for a in t_grid)
    else:
        t = np.asarray(t_grid, dtype=float)
        w_t = trapezoid_weights(t)
    if np.any(t < 0):
        raise DomainError("t grid must be nonnegative")
    if not _halving(cfg.eps_sequence):
        raise DomainError("Richardson extrapolation assumes eps halves at every step")

    feature = _feature_scale(V) if not V.is_zero else 1.0
    n_eps = len(cfg.eps_sequence)
    L1 = np.zeros((len(omegas), len(t)), dtype=complex)
    L1t = np.zeros_like(L1)
    inc = np.zeros(n_eps - 1)
    worst = 0.0
    for i, om in enumerate(omegas):
        Le, Lte = _ray_values(V, om, t, cfg, feature)
        L1[i], prev = _richardson(Le, cfg.richardson_levels)
        L1t[i], prev_t = _richardson(Lte, cfg.richardson_levels)
        worst = max(worst, float(np.max(np.abs(L1[i] - prev), initial=0.0)),
                    float(np.max(np.abs(L1t[i] - prev_t), initial=0.0)))
        inc = np.maximum(inc, np.max(np.abs(np.diff(Le, axis=0)), axis=1, initial=0.0))
    scale = max(float(np.max(np.abs(L1), initial=0.0)), float(np.max(np.abs(L1t), initial=0.0)))
    residual = worst / scale if scale > 0 else 0.0
    profile = RayProfile(omegas, w_omega, t, np.asarray(w_t, dtype=float), L1, L1t,
                         tuple(cfg.eps_sequence), residual,
                         tuple(float(v) / scale if scale > 0 else 0.0 for v in inc),
                         complex(V.fourier(np.zeros(3))), label=V.kind)
    if check and residual > cfg.tolerance:
        raise AccuracyError("eps extrapolation of the ray integrals did not settle", residual)
    return profile


def l1_mass(profile: RayProfile) -> float:
    """Integral of |L1(t w)| over t >= 0 and the sphere, on the profile's grids."""
    return float(profile.omega_weights @ (np.abs(profile.L1) @ profile.t_weights))


def l1_tilde_mass(profile: RayProfile) -> float:
    return float(profile.omega_weights @ (np.abs(profile.L1_tilde) @ profile.t_weights))


def tail_mass_estimate(profile: RayProfile) -> float:
    """Mass of L1 beyond the last t node, from the 4|V^(0)|/t^2 asymptotics."""
    t_end = float(profile.t[-1])
    if t_end <= 0:
        return math.inf
    return 4.0 * math.pi * 4.0 * abs(profile.v_hat_zero) / t_end


@dataclass(frozen=True)
class PlancherelReport:
    lhs: float
    rhs: float
    ratio: float
    weighted_lhs: float
    weighted_rhs: float
    weighted_ratio: float


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        if lhs > 1e-300:
            raise DomainError("Plancherel check: right side vanishes while left side does not")
        return 0.0
    return lhs / rhs


def plancherel_check(profile: RayProfile, V: Potential) -> PlancherelReport:
    """Compare the L2 mass of L1 (and of t L1) with (2 pi)^3 ||V||_2^2 (and ||x V||_2^2)."""
    a2 = np.abs(profile.L1) ** 2
    lhs = float(profile.omega_weights @ (a2 @ profile.t_weights))
    wlhs = float(profile.omega_weights @ (a2 @ (profile.t_weights * profile.t ** 2)))
    rhs = (2.0 * math.pi) ** 3 * l2_norm(V) ** 2
    wrhs = (2.0 * math.pi) ** 3 * moment_l2_norm(V) ** 2
    return PlancherelReport(lhs, rhs, _ratio(lhs, rhs), wlhs, wrhs, _ratio(wlhs, wrhs))


@dataclass(frozen=True)
class ParsevalReport:
    lhs: float
    rhs: float
    relative_error: float
    t: np.ndarray
    values: np.ndarray


def full_line_parseval(V: Potential, omega, n: int = 1 << 16, s_max: float | None = None) -> ParsevalReport:
    """Full-line version of the ray transform evaluated by FFT.

    With t ranging over the whole line, integral |L(t)|^2 dt = 4 pi integral_0^inf |s V^(s w)|^2 ds.
    The left side uses FFT samples of L; the right side uses adaptive quadrature.
    """
    omega = np.asarray(omega, dtype=float)
    if s_max is None:
        s_max = _s_limit(V, omega, RayQuadConfig(eps_sequence=(1e-6, 5e-7), richardson_levels=1))
    ds = s_max / n
    s = ds * np.arange(n)
    g = s * fourier_on_ray(V, omega, s)
    # L(t_m) = sum_j g_j exp(-i t_m s_j / 2) ds with t_m = 4 pi m / (n ds)
    vals = np.fft.fftshift(np.fft.fft(g)) * ds
    m = np.arange(n) - n // 2
    t = 4.0 * math.pi * m / (n * ds)
    dt = 4.0 * math.pi / (n * ds)
    lhs = float(np.sum(np.abs(vals) ** 2) * dt)

    def integrand(x):
        return float(np.abs(x * fourier_on_ray(V, omega, [x])[0]) ** 2)

    pts = sorted({b for b in getattr(V, "breakpoints", ()) if 0 < b < s_max})
    rhs = 4.0 * math.pi * integrate.quad(integrand, 0.0, s_max, epsabs=0.0, epsrel=1e-12,
                                         limit=2000, points=pts or None)[0]
    rel = abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs)
    return ParsevalReport(lhs, rhs, rel, t, vals)


def leading_term(V: Potential, t, tilde: bool = False):
    """Leading large-t behavior of L1 (or L1~ when tilde is set).

    Two integrations by parts give L1 ~ -4 <t>^-2 V^(0) and L1~ ~ +4 <t>^-2 V^(0).
    """
    t = np.asarray(t, dtype=float)
    v0 = float(np.real(V.fourier(np.zeros(3))))
    sign = 1.0 if tilde else -1.0
    return sign * 4.0 * v0 / (1.0 + t * t)


def leading_remainder_mass(profile: RayProfile, V: Potential, eps: float = 0.5) -> float:
    """Integral of |L1 - leading| <t>^(1+eps) over the profile grid."""
    lead = leading_term(V, profile.t)
    weight = profile.t_weights * (1.0 + profile.t ** 2) ** (0.5 * (1.0 + eps))
    return float(profile.omega_weights @ (np.abs(profile.L1 - lead[None, :]) @ weight))
