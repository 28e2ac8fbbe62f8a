"""Frequency-side oracle for the first-order wave operator.

For Gaussian potentials and Gaussian packets, the Fourier transform of W1+ f is

    -(2 pi)^-3 * integral V^(zeta - eta) f^(eta) / (|zeta|^2 - |eta|^2 - i0) d eta.

The angular integral over |eta| = rho is exact (an entire sinh(z)/z), and the radial
integral is a principal value plus the i pi residue term. The result is mapped back
to physical space with a radial Gauss-Legendre x sphere rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grids import Grid3, gauss_legendre, sphere_rule
from .potential_lab import Potential
from .testfuncs import GaussianPacket


@dataclass(frozen=True)
class OracleConfig:
    zeta_radius: float | None = None    # None picks a radius from the Gaussian widths
    n_radial: int = 80
    sphere_order: int = 59
    rho_radius: float | None = None
    n_rho: int = 240
    chunk: int = 4000


def _gaussian_terms(V: Potential):
    terms = V.terms if V.kind == "sum" else (V,)
    out = []
    for t in terms:
        if t.kind != "gaussian":
            raise DomainError("the frequency oracle handles Gaussian potentials only")
        out.append((t.param("amplitude"), t.param("width"), np.asarray(t.center, dtype=float)))
    return out


def _sinh_ratio(z):
    """sinh(z)/z scaled as exp(z) * (1 - exp(-2z)) / (2z) for stability; returns (ratio_over_exp, z)."""
    z = np.where(np.real(z) < 0, -z, z)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    ratio = np.where(small, 1.0, (1.0 - np.exp(-2.0 * zs)) / (2.0 * zs))
    return ratio, np.where(small, 0.0, zs)


def angular_integral(V: Potential, f: GaussianPacket, zeta, rho) -> np.ndarray:
    """rho^2 * integral over the unit sphere of V^(zeta - rho nu) f^(rho nu) d nu.

    zeta has shape (m, 3) and rho shape (m, q) or (q,); the result has shape (m, q).
    """
    zeta = np.asarray(zeta, dtype=float)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (len(zeta), np.shape(rho)[-1]))
    k0 = np.asarray(f.k0, dtype=float)
    c = np.asarray(f.center, dtype=float)
    s2 = f.sigma ** 2
    zz = np.sum(zeta * zeta, axis=-1)[:, None]
    out = np.zeros(rho.shape, dtype=complex)
    for amp, w, cv in _gaussian_terms(V):
        u = rho[..., None] * (w * w * zeta[:, None, :] / 2.0 + 1j * cv + s2 * k0 - 1j * c)
        const = (-w * w * (zz + rho ** 2) / 4.0 - 1j * (zeta @ cv)[:, None]
                 - s2 * (rho ** 2 + k0 @ k0) / 2.0 + 1j * (k0 @ c))
        ratio, z = _sinh_ratio(np.sqrt(np.sum(u * u, axis=-1)))
        pref = amp * (math.pi * w * w) ** 1.5 * (2.0 * math.pi * s2) ** 1.5 * 4.0 * math.pi
        out += pref * np.exp(const + z) * ratio
    return f.amplitude * out * rho ** 2


def born_fourier(V: Potential, f: GaussianPacket, zeta, config: OracleConfig = OracleConfig()) -> np.ndarray:
    """Fourier transform of W1+ f at the frequencies zeta (shape (m, 3))."""
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    R = config.rho_radius or _default_rho_radius(V, f)
    rho, wr = gauss_legendre(0.0, R, config.n_rho)
    out = np.empty(len(zeta), dtype=complex)
    for i in range(0, len(zeta), config.chunk):
        z = zeta[i:i + config.chunk]
        k = np.linalg.norm(z, axis=-1)
        if np.any(k >= R):
            raise DomainError("frequency radius exceeds the radial integration range")
        a_rho = angular_integral(V, f, z, rho)
        a_k = angular_integral(V, f, z, k[:, None])[:, 0]
        pv = np.sum(wr * (a_rho - a_k[:, None]) / (k[:, None] ** 2 - rho ** 2), axis=-1)
        kk = np.where(k > 0, k, 1.0)
        log_term = np.where(k > 0, np.log((R + kk) / (R - kk)) / (2.0 * kk), 0.0)
        residue = np.where(k > 0, 1j * math.pi * a_k / (2.0 * kk), 0.0)
        out[i:i + config.chunk] = -(pv + a_k * log_term + residue) / (2.0 * math.pi) ** 3
    return out


def _default_zeta_radius(V: Potential, f: GaussianPacket) -> float:
    wmin = min(w for _, w, _ in _gaussian_terms(V))
    spread = math.sqrt(2.0 / wmin ** 2 + 1.0 / f.sigma ** 2)
    return float(np.linalg.norm(f.k0)) + 5.5 * spread


def _default_rho_radius(V: Potential, f: GaussianPacket) -> float:
    return max(12.0, float(np.linalg.norm(f.k0)) + 10.0 / f.sigma, 1.2 * _default_zeta_radius(V, f))


def born_on_grid(V: Potential, f: GaussianPacket, grid: Grid3,
                 config: OracleConfig = OracleConfig()) -> np.ndarray:
    """W1+ f sampled on a grid, by inverse transform of born_fourier."""
    Z = config.zeta_radius or _default_zeta_radius(V, f)
    r, wr = gauss_legendre(0.0, Z, config.n_radial)
    nu, wn = sphere_rule(config.sphere_order)
    zeta = (r[:, None, None] * nu[None]).reshape(-1, 3)
    wz = (wr[:, None] * r[:, None] ** 2 * wn[None]).reshape(-1)
    cfg = OracleConfig(Z, config.n_radial, config.sphere_order, config.rho_radius or max(_default_rho_radius(V, f), 1.1 * Z),
                       config.n_rho, config.chunk)
    phi = born_fourier(V, f, zeta, cfg) * wz
    # separable inverse transform: exp(i x.zeta) = prod over axes
    ax = grid.axis()
    n = grid.n
    out = np.zeros((n, n, n), dtype=complex)
    for i in range(0, len(zeta), config.chunk):
        sl = slice(i, i + config.chunk)
        e0 = np.exp(1j * np.outer(ax, zeta[sl, 0]))
        e1 = np.exp(1j * np.outer(ax, zeta[sl, 1]))
        e2 = np.exp(1j * np.outer(ax, zeta[sl, 2]))
        m = (e0[:, None, :] * e1[None, :, :] * phi[sl]).reshape(n * n, -1)
        out += (m @ e2.T).reshape(n, n, n)
    return out / (2.0 * math.pi) ** 3
