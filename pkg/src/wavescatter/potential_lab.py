"""Potentials on R^3: evaluation, Fourier transforms along rays, and the norms that gate the theory.

Fourier convention: V^(xi) = integral of exp(-i xi.x) V(x) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.ndimage import map_coordinates

from .errors import ConfigError, DivergenceError, DomainError, ResolutionError
from .grids import Grid3, gauss_legendre, read_grid_file, sphere_rule
from .keyvalue import get_float, get_floats, read_key_values, subsection

KINDS = ("gaussian", "square_well", "yukawa", "sampled", "sum")


def _ball_factor(x):
    """(sin x - x cos x) / x^3 with a series near zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small] ** 2
    out[small] = 1.0 / 3.0 - xs / 30.0 + xs ** 2 / 840.0 - xs ** 3 / 45360.0
    xl = x[~small]
    out[~small] = (np.sin(xl) - xl * np.cos(xl)) / xl ** 3
    return out


@dataclass(frozen=True, eq=False)
class Potential:
    """A real potential. Build instances with the factory functions below.

    Analytic kinds are radial about `center`; `radial` is true when every analytic
    piece is centered at the origin. Sums are kept flat.
    """

    kind: str
    params: tuple[tuple[str, float], ...] = ()
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    terms: tuple["Potential", ...] = ()
    grid: Grid3 | None = None
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown potential kind {self.kind!r}")
        if self.kind == "sum" and any(t.kind == "sum" for t in self.terms):
            raise DomainError("sum potentials must be flat")
        if self.kind == "sampled":
            if self.grid is None or self.values is None or self.values.shape != self.grid.shape:
                raise DomainError("sampled potentials need a grid and matching values")
            if np.iscomplexobj(self.values):
                raise DomainError("potentials are real-valued")

    # ---- metadata -------------------------------------------------------------
    def param(self, name: str) -> float:
        return dict(self.params)[name]

    @property
    def is_zero(self) -> bool:
        if self.kind == "sum":
            return all(t.is_zero for t in self.terms)
        if self.kind == "sampled":
            return not np.any(self.values)
        key = "depth" if self.kind == "square_well" else "amplitude"
        return self.param(key) == 0.0

    @property
    def radial(self) -> bool:
        if self.kind == "sum":
            return all(t.radial for t in self.terms)
        if self.kind == "sampled":
            return False
        return not any(self.center)

    @property
    def support_radius(self) -> float:
        """Radius of a ball about the origin containing supp V (inf when unbounded)."""
        if self.kind == "sum":
            return max((t.support_radius for t in self.terms), default=0.0)
        if self.kind == "sampled":
            nz = np.nonzero(self.values)
            if not nz[0].size:
                return 0.0
            ax = self.grid.axis()
            r = np.sqrt(ax[nz[0]] ** 2 + ax[nz[1]] ** 2 + ax[nz[2]] ** 2)
            return float(r.max() + math.sqrt(3.0) * self.grid.h)
        if self.kind == "square_well":
            return float(np.linalg.norm(self.center)) + self.param("radius")
        return math.inf

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Radii where a radial profile has a kink or jump."""
        if self.kind == "sum":
            return tuple(sorted({b for t in self.terms for b in t.breakpoints}))
        if self.kind == "square_well":
            return (self.param("radius"),)
        if self.kind == "yukawa":
            return (self.param("core"),)
        return ()

    # ---- evaluation -----------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "sum":
            return sum((t(x) for t in self.terms), np.zeros(x.shape[:-1]))
        if self.kind == "sampled":
            g = self.grid
            coords = (np.moveaxis(x, -1, 0) + g.extent) / g.h
            flat = coords.reshape(3, -1)
            vals = map_coordinates(self.values, flat, order=1, mode="constant", cval=0.0)
            return vals.reshape(x.shape[:-1])
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        return self._profile(r)

    def radial_profile(self, r) -> np.ndarray:
        """V as a function of |x| for radial potentials."""
        if not self.radial:
            raise DomainError("radial_profile needs a radial potential")
        r = np.asarray(r, dtype=float)
        if self.kind == "sum":
            return sum((t._profile(r) for t in self.terms), np.zeros(r.shape))
        return self._profile(r)

    def _profile(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            a, w = self.param("amplitude"), self.param("width")
            return a * np.exp(-(r / w) ** 2)
        if self.kind == "square_well":
            d, R = self.param("depth"), self.param("radius")
            return np.where(r <= R, -d, 0.0)
        if self.kind == "yukawa":
            a, mu, rc = self.param("amplitude"), self.param("mass"), self.param("core")
            rho = np.maximum(r, rc)
            return a * np.exp(-mu * rho) / rho
        raise DomainError(f"{self.kind} potentials have no single radial profile")

    # ---- Fourier transform ------------------------------------------------------
    def radial_fourier(self, s) -> np.ndarray:
        """V^ as a function of |xi| for radial potentials, in closed form."""
        if not self.radial:
            raise DomainError("radial_fourier needs a radial potential")
        s = np.abs(np.asarray(s, dtype=float))
        if self.kind == "sum":
            return sum((t._radial_fourier(s) for t in self.terms), np.zeros(s.shape))
        return self._radial_fourier(s)

    def _radial_fourier(self, s):
        if self.kind == "gaussian":
            a, w = self.param("amplitude"), self.param("width")
            return a * (math.pi * w * w) ** 1.5 * np.exp(-(w * s) ** 2 / 4.0)
        if self.kind == "square_well":
            d, R = self.param("depth"), self.param("radius")
            return -d * 4.0 * math.pi * R ** 3 * _ball_factor(s * R)
        if self.kind == "yukawa":
            a, mu, rc = self.param("amplitude"), self.param("mass"), self.param("core")
            inner = a * math.exp(-mu * rc) / rc * rc ** 3 * _ball_factor(s * rc)
            # integral of sin(sr) e^{-mu r} over (rc, inf), divided by s
            x = s * rc
            safe = np.where(s > 0, s, 1.0)
            tail = np.where(
                s > 0,
                (mu * np.sin(x) + s * np.cos(x)) / ((mu * mu + s * s) * safe),
                rc / mu + 1.0 / mu ** 2,
            ) * math.exp(-mu * rc)
            return 4.0 * math.pi * (inner + a * tail)
        raise DomainError(f"{self.kind} potentials have no closed-form radial transform")

    def fourier(self, xi) -> np.ndarray:
        """V^(xi) for an array of frequency vectors with trailing dimension 3."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "sum":
            return sum((t.fourier(xi) for t in self.terms), np.zeros(xi.shape[:-1], dtype=complex))
        if self.kind == "sampled":
            return self._sampled_fourier(xi)
        s = np.linalg.norm(xi, axis=-1)
        out = self._radial_fourier(s).astype(complex)
        if any(self.center):
            out = out * np.exp(-1j * (xi @ np.asarray(self.center)))
        return out

    @cached_property
    def _padded_spectrum(self):
        # Zero padding by two halves the frequency spacing used for interpolation.
        g = self.grid
        n2 = 2 * g.n
        buf = np.zeros((n2, n2, n2))
        buf[: g.n, : g.n, : g.n] = self.values
        spec = np.fft.fftshift(np.fft.fftn(buf)) * g.cell_volume
        k = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(n2, d=g.h))
        # samples start at -extent, so multiply by exp(i k extent) per axis
        ph = np.exp(1j * k * g.extent)
        spec *= ph[:, None, None] * ph[None, :, None] * ph[None, None, :]
        return spec, k

    def _sampled_fourier(self, xi):
        spec, k = self._padded_spectrum
        dk = k[1] - k[0]
        if np.any(xi < k[0] - 1e-12) or np.any(xi > k[-1] + 1e-12):
            raise ResolutionError(
                f"frequency beyond the sampled grid Nyquist limit {self.grid.nyquist:.4g}")
        coords = (np.moveaxis(xi, -1, 0).reshape(3, -1) - k[0]) / dk
        re = map_coordinates(spec.real, coords, order=1, mode="nearest")
        im = map_coordinates(spec.imag, coords, order=1, mode="nearest")
        return (re + 1j * im).reshape(xi.shape[:-1])

    def fourier_at_zero(self) -> float:
        return float(np.real(self.fourier(np.zeros(3))))

    # ---- algebra ----------------------------------------------------------------
    def scaled(self, factor: float) -> "Potential":
        """factor * V."""
        factor = float(factor)
        if self.kind == "sum":
            return Potential("sum", terms=tuple(t.scaled(factor) for t in self.terms))
        if self.kind == "sampled":
            return Potential("sampled", grid=self.grid, values=self.values * factor)
        key = "depth" if self.kind == "square_well" else "amplitude"
        p = dict(self.params)
        p[key] *= factor
        return Potential(self.kind, tuple(p.items()), self.center)

    def dilated(self, alpha: float) -> "Potential":
        """alpha^2 V(alpha x), the scaling that preserves the B-norm."""
        alpha = float(alpha)
        if alpha <= 0:
            raise DomainError("dilation factor must be positive")
        c = tuple(ci / alpha for ci in self.center)
        if self.kind == "sum":
            return Potential("sum", terms=tuple(t.dilated(alpha) for t in self.terms))
        if self.kind == "sampled":
            g = Grid3(self.grid.extent / alpha, self.grid.n)
            return Potential("sampled", grid=g, values=self.values * alpha ** 2)
        p = dict(self.params)
        if self.kind == "gaussian":
            p["amplitude"] *= alpha ** 2
            p["width"] /= alpha
        elif self.kind == "square_well":
            p["depth"] *= alpha ** 2
            p["radius"] /= alpha
        else:
            p["amplitude"] *= alpha
            p["mass"] *= alpha
            p["core"] /= alpha
        return Potential(self.kind, tuple(p.items()), c)

    def rotated(self, rotation) -> "Potential":
        """V(R^T x) for a rotation matrix R (analytic kinds only)."""
        R = np.asarray(rotation, dtype=float)
        if self.kind == "sum":
            return Potential("sum", terms=tuple(t.rotated(R) for t in self.terms))
        if self.kind == "sampled":
            raise DomainError("rotation of sampled potentials is not supported")
        return Potential(self.kind, self.params, tuple(float(v) for v in R @ np.asarray(self.center)))

    def __add__(self, other: "Potential") -> "Potential":
        return sum_of(self, other)

    def __mul__(self, factor: float) -> "Potential":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __neg__(self) -> "Potential":
        return self.scaled(-1.0)


# ---- factories --------------------------------------------------------------------

def _center(center) -> tuple[float, float, float]:
    if center is None:
        return (0.0, 0.0, 0.0)
    c = tuple(float(v) for v in center)
    if len(c) != 3:
        raise DomainError("center must have three components")
    return c


def gaussian(amplitude: float, width: float, center=None) -> Potential:
    """amplitude * exp(-|x - center|^2 / width^2)."""
    if width <= 0:
        raise DomainError("gaussian width must be positive")
    return Potential("gaussian", (("amplitude", float(amplitude)), ("width", float(width))), _center(center))


def square_well(depth: float, radius: float, center=None) -> Potential:
    """-depth on the closed ball of the given radius, zero outside."""
    if radius <= 0:
        raise DomainError("square well radius must be positive")
    return Potential("square_well", (("depth", float(depth)), ("radius", float(radius))), _center(center))


def yukawa(amplitude: float, mass: float, core: float, center=None) -> Potential:
    """amplitude * exp(-mass * rho) / rho with rho = max(|x - center|, core)."""
    if mass <= 0 or core <= 0:
        raise DomainError("yukawa mass and core cutoff must be positive")
    return Potential("yukawa", (("amplitude", float(amplitude)), ("mass", float(mass)),
                                ("core", float(core))), _center(center))


def sampled(grid: Grid3, values) -> Potential:
    values = np.array(values, dtype=float, copy=True)
    values.setflags(write=False)
    return Potential("sampled", grid=grid, values=values)


def sum_of(*terms: Potential) -> Potential:
    flat: list[Potential] = []
    for t in terms:
        flat.extend(t.terms if t.kind == "sum" else (t,))
    return Potential("sum", terms=tuple(flat))


def zero() -> Potential:
    return sum_of()


# ---- Fourier transform along rays ---------------------------------------------------

def fourier_on_ray(V: Potential, omega, s_grid) -> np.ndarray:
    """V^(s omega) for each s in s_grid (s may be negative)."""
    omega = np.asarray(omega, dtype=float)
    if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise DomainError("omega must be a unit vector")
    s = np.asarray(s_grid, dtype=float)
    if V.radial and V.kind != "sampled":
        return V.radial_fourier(s).astype(complex)
    return V.fourier(s[..., None] * omega)


def radial_fourier_quadrature(V: Potential, s) -> np.ndarray:
    """V^(s) = (4 pi / s) * integral of r sin(sr) V(r) dr by adaptive quadrature.

    Independent of the closed forms; used to cross-check them.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    breaks = V.breakpoints
    out = np.empty(s.shape)
    for i, si in enumerate(s):
        if si == 0.0:
            out[i] = 4.0 * math.pi * _radial_quad(lambda r: r * r * V.radial_profile(r), breaks)
            continue
        val = _radial_quad(lambda r: r * V.radial_profile(r), breaks, weight_freq=si)
        out[i] = 4.0 * math.pi * val / si
    return out


def _radial_quad(fun, breaks=(), weight_freq=None, upper=math.inf):
    """Integral of fun over [0, upper), split at breakpoints; optional sin weight."""
    pts = [0.0] + [b for b in breaks if 0.0 < b < upper]
    total = 0.0
    for a, b in zip(pts, pts[1:] + [upper]):
        if weight_freq is None:
            val, _ = integrate.quad(fun, a, b, epsabs=0.0, epsrel=1e-12, limit=400)
        elif math.isinf(b):
            val, _ = integrate.quad(fun, a, b, weight="sin", wvar=weight_freq, limlst=200, limit=400)
        else:
            val, _ = integrate.quad(fun, a, b, weight="sin", wvar=weight_freq,
                                    epsabs=0.0, epsrel=1e-12, limit=400)
        total += val
    return total


def l1_norm(V: Potential) -> float:
    """Integral of |V| over R^3."""
    return _integrate_power(V, power=1, alpha=0.0)


# ---- shell norms ---------------------------------------------------------------------

@dataclass(frozen=True)
class ShellDecomposition:
    """Dyadic shells [2^k, 2^(k+1)] for k in [k_min, k_max] and their weighted L2 terms."""

    k_min: int = -10
    k_max: int = 10
    contributions: tuple[float, ...] = ()

    def __post_init__(self):
        if self.k_max < self.k_min:
            raise DomainError("empty shell range")

    @property
    def ks(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @property
    def total(self) -> float:
        return math.fsum(self.contributions)


def _shell_integral(V: Potential, r0: float, r1: float, power: int = 2, alpha: float = 0.0) -> float:
    """Integral of <x>^(power*alpha) |V|^power over the shell r0 <= |x| < r1."""
    def weight(r):
        return (1.0 + r * r) ** (0.5 * power * alpha)

    if V.radial:
        def integrand(r):
            return 4.0 * math.pi * r * r * weight(r) * np.abs(V.radial_profile(r)) ** power
        pts = [r0] + [b for b in V.breakpoints if r0 < b < r1] + [r1]
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-13, limit=400)
            total += val
        return total
    if V.kind == "sampled":
        g = V.grid
        r = g.radius()
        mask = (r >= r0) & (r < r1)
        return float(np.sum(weight(r[mask]) * np.abs(V.values[mask]) ** power) * g.cell_volume)
    nodes, w_sph = sphere_rule(59)
    pts = [r0] + [b + float(np.linalg.norm(t.center)) for t in _leaves(V) for b in t.breakpoints] + [r1]
    pts = sorted({p for p in pts if r0 <= p <= r1})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        rr, wr = gauss_legendre(a, b, 48)
        x = rr[:, None, None] * nodes[None, :, :]
        vals = np.abs(V(x)) ** power * weight(rr)[:, None]
        total += float(np.sum(vals * (wr * rr * rr)[:, None] * w_sph[None, :]))
    return total


def _leaves(V: Potential):
    return V.terms if V.kind == "sum" else (V,)


def shell_norms(V: Potential, k_min: int = -10, k_max: int = 10, extend: bool = True,
                tol: float = 1e-10, k_limit: int = 60) -> ShellDecomposition:
    """Per-shell terms 2^(k/2) ||chi_shell V||_2, extended until the edge shells are negligible."""
    if k_max < k_min:
        raise DomainError("empty shell range")

    def term(k):
        return 2.0 ** (k / 2.0) * math.sqrt(max(_shell_integral(V, 2.0 ** k, 2.0 ** (k + 1)), 0.0))

    vals = {k: term(k) for k in range(k_min, k_max + 1)}
    if extend:
        while True:
            total = math.fsum(vals.values())
            if total == 0.0:
                break
            grew = False
            if vals[k_max] > tol * total:
                if k_max >= k_limit:
                    raise DivergenceError(
                        f"B-norm shell sums still growing at k = {k_max}")
                k_max += 1
                vals[k_max] = term(k_max)
                grew = True
            if vals[k_min] > tol * total and k_min > -k_limit:
                k_min -= 1
                vals[k_min] = term(k_min)
                grew = True
            if not grew:
                break
    return ShellDecomposition(k_min, k_max, tuple(vals[k] for k in range(k_min, k_max + 1)))


def b_norm(V: Potential, shells: ShellDecomposition | None = None, extend: bool = True) -> float:
    """Sum over dyadic shells of 2^(k/2) ||chi_shell V||_2."""
    if shells is None:
        shells = ShellDecomposition()
    if shells.contributions:
        return shells.total
    return shell_norms(V, shells.k_min, shells.k_max, extend=extend).total


def _integrate_power(V: Potential, power: int, alpha: float, tol: float = 1e-13,
                     k_limit: int = 60) -> float:
    """Integral of <x>^(power*alpha) |V|^power over R^3, shell by shell from the origin."""
    if alpha == 0.0 and V.kind not in ("sum", "sampled") and any(V.center):
        # unweighted integrals are translation invariant; recentring keeps the jumps spherical
        V = replace(V, center=(0.0, 0.0, 0.0))
    total = _shell_integral(V, 0.0, 2.0 ** -10, power, alpha)
    k = -10
    prev_shell = math.inf
    while True:
        shell = _shell_integral(V, 2.0 ** k, 2.0 ** (k + 1), power, alpha)
        if not math.isfinite(shell):
            raise DivergenceError(f"non-finite shell integral at k = {k}")
        total += shell
        if k >= 2 and shell <= tol * total and shell <= prev_shell:
            return total
        if k >= k_limit:
            raise DivergenceError(f"weighted integral still growing at radius 2^{k}")
        prev_shell = shell
        k += 1


def weighted_l2_norm(V: Potential, alpha: float = 0.0) -> float:
    """||<x>^alpha V||_2 with <x> = (1 + |x|^2)^(1/2)."""
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    return math.sqrt(_integrate_power(V, power=2, alpha=alpha))


def l2_norm(V: Potential) -> float:
    return weighted_l2_norm(V, 0.0)


def moment_l2_norm(V: Potential) -> float:
    """|| |x| V ||_2, the norm of the space |x|^-1 L^2."""
    if V.radial:
        val = _radial_quad(lambda r: 4.0 * math.pi * r ** 4 * V.radial_profile(r) ** 2, V.breakpoints)
        return math.sqrt(val)
    # <x>^2 - 1 = |x|^2
    return math.sqrt(max(weighted_l2_norm(V, 1.0) ** 2 - l2_norm(V) ** 2, 0.0))


# ---- config -------------------------------------------------------------------------

def potential_from_mapping(mapping: dict[str, str], base_dir: str | Path = ".") -> Potential:
    """Build a potential from key-value entries (kind, parameters, optional center)."""
    kind = mapping.get("kind")
    if kind is None:
        raise ConfigError("potential config needs a 'kind' key")
    center = get_floats(mapping, "center", (0.0, 0.0, 0.0))
    if kind == "gaussian":
        V = gaussian(get_float(mapping, "amplitude"), get_float(mapping, "width"), center)
    elif kind == "square_well":
        V = square_well(get_float(mapping, "depth"), get_float(mapping, "radius"), center)
    elif kind == "yukawa":
        V = yukawa(get_float(mapping, "amplitude"), get_float(mapping, "mass"),
                   get_float(mapping, "core"), center)
    elif kind == "sampled":
        if "file" not in mapping:
            raise ConfigError("sampled potential needs a 'file' key")
        values, extents = read_grid_file(Path(base_dir) / mapping["file"])
        n = values.shape[0]
        if values.shape != (n, n, n) or not np.allclose(extents, extents[0]):
            raise ConfigError("sampled potentials need a cubic grid with equal extents")
        V = sampled(Grid3(float(extents[0]), n), values)
    elif kind == "sum":
        idx = sorted({k.split(".")[1] for k in mapping if k.startswith("term.")},
                     key=lambda s: (len(s), s))
        if not idx:
            raise ConfigError("sum potential needs term.<i>.* entries")
        V = sum_of(*(potential_from_mapping(subsection(mapping, f"term.{i}"), base_dir) for i in idx))
    elif kind == "zero":
        V = zero()
    else:
        raise ConfigError(f"unknown potential kind {kind!r}")
    if "support_radius" in mapping:
        declared = get_float(mapping, "support_radius")
        if V.support_radius > declared * (1 + 1e-12):
            raise ConfigError(
                f"declared support radius {declared} is smaller than the potential's {V.support_radius}")
    return V


def load_potential(path: str | Path, prefix: str | None = None) -> Potential:
    mapping = read_key_values(path)
    if prefix:
        mapping = subsection(mapping, prefix)
    return potential_from_mapping(mapping, Path(path).parent)
