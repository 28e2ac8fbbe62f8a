"""Split-step spectral time evolution on a periodic box, and time-limit wave operators.

Conventions: H0 = -Laplacian, H = H0 + V, propagate returns e^{-itH} f, and the wave
operator W+ is the limit of e^{-iTH} e^{iTH0} as T -> +inf (W- uses T -> -inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import DomainError, NonConvergenceError, StepSizeError
from .greens import grid_values
from .grids import Grid3
from .potential_lab import Potential


@dataclass(frozen=True, eq=False)
class Propagation:
    grid: Grid3
    dt: float
    steps: int
    final: np.ndarray
    snapshots: tuple = ()
    conserved_norm_drift: float = 0.0


def _potential_values(V, grid: Grid3) -> np.ndarray | None:
    if V is None:
        return None
    if isinstance(V, Potential):
        return None if V.is_zero else grid_values(V, grid)
    vals = np.asarray(V, dtype=float)
    if vals.shape != grid.shape:
        raise DomainError("potential samples do not match the grid")
    return vals if np.any(vals) else None


def check_step(grid: Grid3, dt: float) -> None:
    """The kinetic phase per step at the per-axis Nyquist frequency must not exceed pi."""
    if abs(dt) * grid.nyquist ** 2 > math.pi * (1.0 + 1e-12):
        raise StepSizeError(f"dt = {dt:.4g} exceeds the spectral step limit {math.pi / grid.nyquist ** 2:.4g}")


def _step_count(t: float, dt: float) -> int:
    if dt <= 0:
        raise DomainError("dt must be positive")
    n = round(abs(t) / dt)
    if abs(n * dt - abs(t)) > 1e-9 * max(1.0, abs(t)):
        raise DomainError(f"t = {t} is not an integer number of steps of {dt}")
    return int(n)


def free_propagate(f: np.ndarray, grid: Grid3, t: float) -> np.ndarray:
    """e^{-itH0} f, exact on the periodic box."""
    return fft.ifftn(fft.fftn(f) * np.exp(-1j * t * grid.k_squared()))


def evolve(f: np.ndarray, V, grid: Grid3, t: float, dt: float,
           snapshot_times=()) -> Propagation:
    """Strang splitting e^{-iV dt/2} e^{-iH0 dt} e^{-iV dt/2} repeated |t|/dt times.

    Negative t runs the same scheme backward. Snapshots are taken at the requested
    times (multiples of dt, same sign as t).
    """
    f = np.asarray(f, dtype=complex)
    if f.shape != grid.shape:
        raise DomainError("f does not match the grid")
    steps = _step_count(t, dt)
    sdt = math.copysign(dt, t) if t != 0 else dt
    v = _potential_values(V, grid)
    snap_steps = {_step_count(s, dt): float(s) for s in snapshot_times}
    if v is None:
        kin_total = np.exp(-1j * t * grid.k_squared())
        final = fft.ifftn(fft.fftn(f) * kin_total)
        snaps = tuple((s, free_propagate(f, grid, s)) for s in sorted(snap_steps.values(), key=abs))
        return Propagation(grid, dt, steps, final, snaps, 0.0)
    # the free flow is exact, so the step limit only matters once V enters
    check_step(grid, dt)
    kin = np.exp(-1j * sdt * grid.k_squared())
    half = np.exp(-0.5j * sdt * v)
    n0 = grid.norm(f)
    u = f.copy()
    drift = 0.0
    snaps = []
    if 0 in snap_steps:
        snaps.append((snap_steps[0], u.copy()))
    for k in range(1, steps + 1):
        u = half * fft.ifftn(fft.fftn(half * u) * kin)
        drift = max(drift, abs(grid.norm(u) - n0) / n0 if n0 else 0.0)
        if k in snap_steps:
            snaps.append((snap_steps[k], u.copy()))
    return Propagation(grid, dt, steps, u, tuple(snaps), drift)


def propagate(f: np.ndarray, V, grid: Grid3, t: float, dt: float) -> np.ndarray:
    """e^{-itH} f by Strang splitting; exact for V = 0."""
    return evolve(f, V, grid, t, dt).final


@dataclass(frozen=True, eq=False)
class WaveLimit:
    values: np.ndarray
    times: tuple[float, ...]
    residuals: tuple[float, ...]
    norm_drift: float
    converged: bool
    iterates: tuple = field(default=(), repr=False)


def wave_limit(f: np.ndarray, V, grid: Grid3, sign: int = 1, T_max: float = 16.0, dt: float = 1.0 / 64,
               schedule=None, strict: bool = True, keep_iterates: bool = False) -> WaveLimit:
    """u(T) = e^{-i sign T H} e^{i sign T H0} f along a schedule of times.

    The default schedule is T_max/4, T_max/2, T_max. Cauchy residuals between consecutive
    iterates must decrease; otherwise NonConvergenceError is raised (strict) or the
    result is flagged as not converged.
    """
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    times = tuple(schedule) if schedule is not None else (T_max / 4.0, T_max / 2.0, T_max)
    f = np.asarray(f, dtype=complex)
    n0 = grid.norm(f)
    iterates = []
    drift = 0.0
    for T in times:
        g = free_propagate(f, grid, -sign * T)
        p = evolve(g, V, grid, sign * T, dt)
        iterates.append(p.final)
        drift = max(drift, abs(grid.norm(p.final) - n0) / n0 if n0 else 0.0)
    res = tuple(grid.norm(b - a) for a, b in zip(iterates, iterates[1:]))
    converged = all(r1 < r0 for r0, r1 in zip(res, res[1:])) or max(res, default=0.0) <= 1e-12 * max(n0, 1.0)
    if strict and not converged:
        raise NonConvergenceError("Cauchy residuals of the time limit do not decrease", res)
    return WaveLimit(iterates[-1], times, res, drift, converged, tuple(iterates) if keep_iterates else ())


def first_order_limit(f: np.ndarray, V: Potential, grid: Grid3, sign: int = 1, T: float = 16.0,
                      dt: float = 1.0 / 64, coupling: float = 1e-3) -> np.ndarray:
    """First-order term of the time-limit wave operator by symmetric coupling extraction.

    (u(cV) - u(-cV)) / (2c) cancels all even orders, leaving W1 f + O(c^2).
    """
    up = wave_limit(f, V.scaled(coupling), grid, sign, schedule=(T,), dt=dt, strict=False).values
    um = wave_limit(f, V.scaled(-coupling), grid, sign, schedule=(T,), dt=dt, strict=False).values
    return (up - um) / (2.0 * coupling)


def project_continuous(f: np.ndarray, states, grid: Grid3) -> np.ndarray:
    """f minus its components along the (grid-normalized) bound states."""
    out = np.asarray(f, dtype=complex).copy()
    for _, psi in states:
        out -= grid.inner(psi, out) * psi
    return out


@dataclass(frozen=True)
class DecayReport:
    times: tuple[float, ...]
    sup_norms: tuple[float, ...]
    exponent: float
    prefactor: float
    boundary_fraction: float
    truncation_warning: bool


def _boundary_fraction(u: np.ndarray, grid: Grid3, width: int = 2) -> float:
    """Share of ||u||^2 in the outer `width` layers of the box."""
    mask = np.ones(grid.shape, dtype=bool)
    mask[width:-width, width:-width, width:-width] = False
    total = float(np.sum(np.abs(u) ** 2))
    return float(np.sum(np.abs(u[mask]) ** 2)) / total if total else 0.0


def dispersive_decay_check(f: np.ndarray, V, grid: Grid3, times, dt: float = 1.0 / 64,
                           states=(), boundary_tol: float = 1e-6) -> DecayReport:
    """Fit sup |e^{-itH} P_c f| ~ C t^p over the given times (least squares in log-log)."""
    times = tuple(float(t) for t in sorted(times))
    if len(times) < 2 or times[0] <= 0:
        raise DomainError("need at least two positive times")
    g = project_continuous(f, states, grid) if states else np.asarray(f, dtype=complex)
    prop = evolve(g, V, grid, times[-1], dt, snapshot_times=times)
    sups = tuple(grid.norm(u, np.inf) for _, u in prop.snapshots)
    p, logc = np.polyfit(np.log(times), np.log(sups), 1)
    frac = max(_boundary_fraction(u, grid) for _, u in prop.snapshots)
    return DecayReport(times, sups, float(p), float(math.exp(logc)), frac, frac > boundary_tol)


def duhamel_residual(f: np.ndarray, V: Potential, grid: Grid3, t: float, dt: float, n_quad: int) -> float:
    """|| e^{-itH} f - e^{-itH0} f + i int_0^t e^{-i(t-s)H0} V e^{-isH} f ds || / ||f||, midpoint rule in s."""
    v = _potential_values(V, grid)
    if v is None:
        return 0.0
    ds = t / n_quad
    f = np.asarray(f, dtype=complex)
    lhs = propagate(f, V, grid, t, dt) - free_propagate(f, grid, t)
    acc = np.zeros(grid.shape, dtype=complex)
    nodes = [(j + 0.5) * ds for j in range(n_quad)]
    for s, us in evolve(f, V, grid, nodes[-1], dt, snapshot_times=nodes).snapshots:
        acc += free_propagate(v * us, grid, t - s)
    return grid.norm(lhs + 1j * ds * acc) / grid.norm(f)


def scattering_limit(f: np.ndarray, V, grid: Grid3, T: float = 16.0, dt: float = 1.0 / 64) -> np.ndarray:
    """S f = W-^* W+ f approximated by e^{iTH0} e^{-2iTH} e^{iTH0} f."""
    g = free_propagate(np.asarray(f, dtype=complex), grid, -T)
    g = propagate(g, V, grid, 2.0 * T, dt)
    return free_propagate(g, grid, -T)


def quadratic_time_integral(f: np.ndarray, V, grid: Grid3, weight: np.ndarray, times, dt: float) -> dict:
    """integral_0^T integral weight * (e^{-itH} f)^2 dx dt at each T in times (trapezoid in t, step dt).

    The state is advanced one step at a time, so no snapshots are stored. Also returns
    the largest boundary-layer share of ||u||^2 seen along the way under the key "boundary".
    """
    times = sorted(float(t) for t in times)
    ends = {_step_count(t, dt): t for t in times}
    last = max(ends, default=0)
    w = np.asarray(weight) * grid.cell_volume
    u = np.asarray(f, dtype=complex)
    prev = complex(np.sum(w * u * u))
    acc = 0.0j
    out: dict = {}
    boundary = _boundary_fraction(u, grid)
    check_step(grid, dt)
    v = _potential_values(V, grid)
    kin = np.exp(-1j * dt * grid.k_squared())
    half = np.ones(grid.shape) if v is None else np.exp(-0.5j * dt * v)
    for k in range(1, last + 1):
        u = half * fft.ifftn(fft.fftn(half * u) * kin)
        cur = complex(np.sum(w * u * u))
        acc += 0.5 * dt * (prev + cur)
        prev = cur
        if k in ends:
            out[ends[k]] = acc
            boundary = max(boundary, _boundary_fraction(u, grid))
    out["boundary"] = boundary
    return out
