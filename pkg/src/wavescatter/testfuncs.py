"""Test functions with closed-form samples and Fourier transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError
from .grids import Grid3, gauss_legendre


@dataclass(frozen=True)
class GaussianPacket:
    """amplitude * exp(-|x - center|^2 / (2 sigma^2) + i k0.x)."""

    sigma: float = 1.5
    k0: tuple[float, float, float] = (2.0, 0.0, 0.0)
    center: tuple[float, float, float] = (0.3, -0.2, 0.1)
    amplitude: complex = 1.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = x - np.asarray(self.center)
        return self.amplitude * np.exp(-np.sum(d * d, axis=-1) / (2.0 * self.sigma ** 2)
                                       + 1j * (x @ np.asarray(self.k0)))

    def sample(self, grid: Grid3) -> np.ndarray:
        return self(grid.points()).reshape(grid.shape)

    def fourier(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        d = eta - np.asarray(self.k0)
        return (self.amplitude * (2.0 * math.pi * self.sigma ** 2) ** 1.5
                * np.exp(-self.sigma ** 2 * np.sum(d * d, axis=-1) / 2.0 - 1j * (d @ np.asarray(self.center))))

    def l2_norm(self) -> float:
        return abs(self.amplitude) * (math.pi * self.sigma ** 2) ** 0.75

    def frequency_radius(self, tol: float = 1e-8) -> float:
        """Radius beyond which |f^| < tol * max |f^|."""
        return float(np.linalg.norm(self.k0)) + math.sqrt(2.0 * math.log(1.0 / tol)) / self.sigma

    def spatial_radius(self, tol: float = 1e-8) -> float:
        return float(np.linalg.norm(self.center)) + self.sigma * math.sqrt(2.0 * math.log(1.0 / tol))

    def moved(self, center=None, k0=None, amplitude=None) -> "GaussianPacket":
        return GaussianPacket(self.sigma, tuple(k0 if k0 is not None else self.k0),
                              tuple(center if center is not None else self.center),
                              self.amplitude if amplitude is None else amplitude)

    def free_evolution(self, x, t: float) -> np.ndarray:
        """(e^{-it H0} f)(x) with H0 = -Laplacian, in closed form."""
        x = np.asarray(x, dtype=float)
        s2 = self.sigma ** 2
        a = s2 + 2j * t
        k0 = np.asarray(self.k0)
        d = x - np.asarray(self.center) - 2.0 * t * k0
        phase = 1j * (x @ k0) - 1j * t * (k0 @ k0)
        return self.amplitude * (s2 / a) ** 1.5 * np.exp(-np.sum(d * d, axis=-1) / (2.0 * a) + phase)


def _bump(u):
    """Smooth bump on (0, 1), zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0) & (u < 1)
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (ui * (1.0 - ui)) + 4.0)
    return out


@dataclass(frozen=True)
class AnnulusFunction:
    """Radial function whose Fourier transform is a smooth bump on k_inner <= |xi| <= k_outer."""

    k_inner: float = 1.0
    k_outer: float = 1.2
    amplitude: float = 1.0

    def radial_fourier(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return self.amplitude * _bump((k - self.k_inner) / (self.k_outer - self.k_inner))

    def fourier(self, eta) -> np.ndarray:
        return self.radial_fourier(np.linalg.norm(np.asarray(eta, dtype=float), axis=-1)).astype(complex)

    def radial_profile(self, r, n: int = 96) -> np.ndarray:
        """f(r) = (2 pi)^-3 * integral of b(k) 4 pi sin(kr)/(kr) k^2 dk."""
        r = np.asarray(r, dtype=float)
        k, w = gauss_legendre(self.k_inner, self.k_outer, n)
        b = self.radial_fourier(k) * w * k * k
        kr = np.multiply.outer(r, k)
        return (4.0 * math.pi / (2.0 * math.pi) ** 3) * (np.sinc(kr / math.pi) @ b)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.radial_profile(np.linalg.norm(x, axis=-1)).astype(complex)

    def sample(self, grid: Grid3) -> np.ndarray:
        return self(grid.points()).reshape(grid.shape)

    def frequency_radius(self, tol: float = 1e-8) -> float:
        return self.k_outer

    def l2_norm(self) -> float:
        val, _ = integrate.quad(lambda k: self.radial_fourier(k) ** 2 * k * k, self.k_inner, self.k_outer,
                                epsabs=0.0, epsrel=1e-12)
        return math.sqrt(4.0 * math.pi * val / (2.0 * math.pi) ** 3)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Grid samples with a Fourier transform by direct summation (a Riemann sum of the integral)."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise DomainError("samples do not match the grid")

    def __call__(self, x) -> np.ndarray:
        raise DomainError("sampled functions are only available on their grid")

    def sample(self, grid: Grid3) -> np.ndarray:
        if grid != self.grid:
            raise DomainError("sampled functions are only available on their grid")
        return np.asarray(self.values, dtype=complex)

    def fourier(self, eta, chunk: int = 1024) -> np.ndarray:
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        ax = self.grid.axis()
        f = np.asarray(self.values, dtype=complex)
        out = np.empty(len(eta), dtype=complex)
        for s in range(0, len(eta), chunk):
            e = eta[s:s + chunk]
            e0, e1, e2 = (np.exp(-1j * np.outer(e[:, d], ax)) for d in range(3))
            t = f @ e2.T                                   # (n, n, m)
            u = np.einsum("abm,mb->am", t, e1)
            out[s:s + chunk] = np.einsum("am,ma->m", u, e0)
        return out * self.grid.cell_volume

    def l2_norm(self) -> float:
        return self.grid.norm(self.values)
