"""Radial ODE oracles for spherically symmetric potentials (s-wave channel).

With u(r) = r psi(r), the s-wave equation is u'' = (V(r) - E) u with u(0) = 0.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import DomainError
from .potential_lab import Potential


def _integrate(V: Potential, energy: float, r_max: float, coupling: float = 1.0):
    """Return (u, u') at r_max for u'' = (c V - E) u, u(0)=0, u'(0)=1."""
    breaks = [b for b in V.breakpoints if 0.0 < b < r_max]
    edges = [0.0] + breaks + [r_max]
    y = np.array([0.0, 1.0])

    def rhs(r, y):
        return [y[1], (coupling * float(V.radial_profile(r)) - energy) * y[0]]

    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=1e-12, atol=1e-14)
        y = sol.y[:, -1]
        # rescale to avoid overflow for strongly bound states
        scale = max(abs(y[0]), abs(y[1]))
        if scale > 1e100:
            y = y / scale
    return y[0], y[1]


def _matching_radius(V: Potential, r_max: float | None) -> float:
    if r_max is not None:
        return r_max
    R = V.support_radius
    return R if math.isfinite(R) else 30.0


def zero_energy_slope(V: Potential, coupling: float = 1.0, r_max: float | None = None) -> float:
    """u'(R) at zero energy for the potential coupling*V, normalized by u'(0)=1.

    For compactly supported V, u is linear outside the support, and a zero-energy
    resonance corresponds to u'(R) = 0.
    """
    if not V.radial:
        raise DomainError("the shooting oracle needs a radial potential")
    _, du = _integrate(V, 0.0, _matching_radius(V, r_max), coupling)
    return float(du)


def critical_couplings(V: Potential, c_max: float, n_scan: int = 400, r_max: float | None = None) -> list[float]:
    """Couplings c in (0, c_max] where c V has a zero-energy resonance or threshold state."""
    cs = np.linspace(c_max / n_scan, c_max, n_scan)
    vals = [zero_energy_slope(V, c, r_max) for c in cs]
    out = []
    for (c0, v0), (c1, v1) in zip(zip(cs, vals), zip(cs[1:], vals[1:])):
        if v0 == 0.0:
            out.append(float(c0))
        elif v0 * v1 < 0:
            out.append(brentq(lambda c: zero_energy_slope(V, c, r_max), c0, c1, xtol=1e-13))
    return out


def square_well_critical_couplings(radius: float, count: int = 3) -> list[float]:
    """Depths at which -c chi_{|x| <= radius} has a zero-energy resonance: ((2n-1) pi / 2)^2 / radius^2."""
    return [((2 * n - 1) * math.pi / 2.0) ** 2 / radius ** 2 for n in range(1, count + 1)]


def bound_state_energies(V: Potential, r_max: float | None = None, n_scan: int = 800) -> list[float]:
    """Negative s-wave energies found by matching to exp(-kappa r) at the support edge."""
    if not V.radial:
        raise DomainError("the shooting oracle needs a radial potential")
    R = _matching_radius(V, r_max)
    rs = np.linspace(0.0, R, 2001)
    vmin = float(np.min(V.radial_profile(rs)))
    if vmin >= 0:
        return []
    kmax = math.sqrt(-vmin)

    def mismatch(kappa):
        u, du = _integrate(V, -kappa * kappa, R)
        norm = math.hypot(u, du)
        return (du + kappa * u) / norm

    ks = np.linspace(kmax * 1e-4, kmax, n_scan)
    vals = [mismatch(k) for k in ks]
    roots = []
    for (k0, v0), (k1, v1) in zip(zip(ks, vals), zip(ks[1:], vals[1:])):
        if v0 * v1 < 0:
            roots.append(brentq(mismatch, k0, k1, xtol=1e-14))
    return sorted(-k * k for k in roots)


def square_well_ground_energy(depth: float, radius: float) -> float:
    """Lowest s-wave energy of -depth chi_{|x|<=radius} from k cot(k R) = -kappa."""
    if depth * radius ** 2 <= (math.pi / 2.0) ** 2:
        raise DomainError("the well is too shallow to bind")

    def f(kappa):
        k = math.sqrt(depth - kappa * kappa)
        return k * math.cos(k * radius) + kappa * math.sin(k * radius)

    ks = np.linspace(1e-9, math.sqrt(depth) * (1 - 1e-12), 4001)
    vals = [f(k) for k in ks]
    roots = [brentq(f, a, b, xtol=1e-15)
             for a, b, fa, fb in zip(ks[:-1], ks[1:], vals[:-1], vals[1:]) if fa * fb < 0]
    return -max(roots) ** 2
