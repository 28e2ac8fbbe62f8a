"""Spatial grids, spherical and radial quadrature rules, and the binary grid file format."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import lebedev_rule

from .errors import DomainError

# Lebedev orders available in scipy, smallest first.
_LEBEDEV_ORDERS = (3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31, 35, 41, 47,
                   53, 59, 65, 71, 77, 83, 89, 95, 101, 107, 113, 119, 125, 131)


@dataclass(frozen=True)
class Grid3:
    """Uniform cubic grid on [-extent, extent)^3 with n points per axis.

    Points sit at -extent + j*h, so the origin is a grid point and the grid is
    compatible with FFT periodicity on a box of side 2*extent.
    """

    extent: float
    n: int

    def __post_init__(self):
        if self.n <= 0 or self.n % 2:
            raise DomainError(f"points per axis must be positive and even, got {self.n}")
        if not self.extent > 0:
            raise DomainError(f"extent must be positive, got {self.extent}")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def size(self) -> int:
        return self.n ** 3

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    def axis(self) -> np.ndarray:
        return -self.extent + self.h * np.arange(self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ax = self.axis()
        return np.meshgrid(ax, ax, ax, indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points as an (n^3, 3) array in row-major order."""
        x, y, z = self.mesh()
        return np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    def weights(self) -> np.ndarray:
        return np.full(self.size, self.cell_volume)

    def radius(self) -> np.ndarray:
        x, y, z = self.mesh()
        return np.sqrt(x * x + y * y + z * z)

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers along one axis in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    def k_squared(self) -> np.ndarray:
        k = self.wavenumbers()
        return k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2

    @property
    def nyquist(self) -> float:
        return np.pi / self.h

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Grid inner product sum conj(f) g h^3."""
        return complex(np.vdot(f, g) * self.cell_volume)

    def norm(self, f: np.ndarray, p: float = 2) -> float:
        a = np.abs(f)
        if np.isinf(p):
            return float(a.max()) if a.size else 0.0
        return float((np.sum(a ** p) * self.cell_volume) ** (1.0 / p))

    def refined(self, factor: int = 2) -> "Grid3":
        return Grid3(self.extent, self.n * factor)


def sphere_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Lebedev nodes (N, 3) and weights summing to 4*pi, for the smallest order >= `order`."""
    return _sphere_rule_cached(_lebedev_order(order))


def _lebedev_order(order: int) -> int:
    for q in _LEBEDEV_ORDERS:
        if q >= order:
            return q
    raise DomainError(f"no spherical rule of order {order}; maximum is {_LEBEDEV_ORDERS[-1]}")


@lru_cache(maxsize=None)
def _sphere_rule_cached(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = lebedev_rule(order)
    nodes = np.ascontiguousarray(x.T)
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    nodes.setflags(write=False)
    w = np.asarray(w, dtype=float)
    w.setflags(write=False)
    return nodes, w


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def panel_gauss_legendre(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule over consecutive panels given by `edges`."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = a + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    """Trapezoid weights for a sorted, possibly nonuniform abscissa."""
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    if x.size < 2:
        return w
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def default_t_grid(n_near: int = 64, n_tail: int = 64, t_split: float = 4.0,
                   t_max: float = 400.0) -> tuple[np.ndarray, np.ndarray]:
    """Uniform nodes on [0, t_split] plus log-spaced nodes on (t_split, t_max], trapezoid weights."""
    near = np.linspace(0.0, t_split, n_near)
    tail = np.geomspace(t_split, t_max, n_tail + 1)[1:]
    t = np.concatenate([near, tail])
    return t, trapezoid_weights(t)


# Binary grid file: 3 x u64 dims, 3 x f64 extents (little-endian), then row-major values.
# Real files hold f64 values. Complex files insert a u64 flag equal to 1 after the
# extents and store interleaved real/imaginary f64 pairs.
_HEADER = struct.Struct("<3Q3d")
_FLAG = struct.Struct("<Q")


def write_grid_file(path: str | Path, values: np.ndarray, extents) -> None:
    values = np.asarray(values)
    if values.ndim != 3:
        raise DomainError("grid file values must be three-dimensional")
    ext = [float(e) for e in np.broadcast_to(np.asarray(extents, dtype=float), (3,))]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*values.shape, *ext))
        if np.iscomplexobj(values):
            fh.write(_FLAG.pack(1))
            fh.write(np.ascontiguousarray(values, dtype="<c16").tobytes())
        else:
            fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_grid_file(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return (values, extents); complex files are recognized by their size."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DomainError(f"{path}: truncated grid header")
    *dims, e0, e1, e2 = _HEADER.unpack_from(data, 0)
    count = int(np.prod(dims))
    body = len(data) - _HEADER.size
    if body == 8 * count:
        vals = np.frombuffer(data, dtype="<f8", offset=_HEADER.size, count=count)
    elif body == _FLAG.size + 16 * count and _FLAG.unpack_from(data, _HEADER.size)[0] == 1:
        vals = np.frombuffer(data, dtype="<c16", offset=_HEADER.size + _FLAG.size, count=count)
    else:
        raise DomainError(f"{path}: body size {body} does not match dims {tuple(dims)}")
    return vals.reshape(dims).copy(), np.array([e0, e1, e2])
