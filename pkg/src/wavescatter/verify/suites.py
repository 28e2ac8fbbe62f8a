"""Verification suites. Each suite returns a Report of anchored checks and plot-data tables.

Suites share one SuiteContext so that point sets, kernel families, and time limits
are built once per run.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import replace

import numpy as np
from scipy import fft

from ..errors import ConfigError, DivergenceError, DomainError, StepSizeError
from ..freq_oracle import born_on_grid
from ..greens import (PointSet, bound_states, birman_schwinger_couplings, grid_values, min_singular_value,
                      perturbed_resolvent, self_cell_mean, support_points, zero_energy_check)
from ..grids import Grid3, default_t_grid
from ..kernel_algebra import (EtaGrid, EtaKernelFamily, born_amplitude, explicit_inverse_residual,
                              identity_family, inverse_residuals, invert_family, neumann_divergence_coupling,
                              neumann_partial_sums, ostar, scattering_amplitude, scattering_family, spectral_radii,
                              t1_family)
from ..potential_lab import Potential, gaussian, weighted_l2_norm, yukawa, zero
from ..propagator import (check_step, first_order_limit, free_propagate, project_continuous, propagate,
                          quadratic_time_integral, scattering_limit, wave_limit)
from ..radial import critical_couplings
from ..ray_transform import (RayQuadConfig, compute_l1, default_omega_grid, leading_term, plancherel_check)
from ..structure import (annulus_leakage, apply_scattering, apply_structure, apply_wave, apply_wave_many,
                         asymptotic_split,
                         decompose_s1, decompose_w1, structure_t_grid)
from ..testfuncs import AnnulusFunction, GaussianPacket, SampledFunction
from .config import ExperimentConfig
from .report import PLUMBING, Report

SQRT_PI = math.sqrt(math.pi)


# ---- shared helpers ----------------------------------------------------------------------

def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||, or ||a|| when b vanishes."""
    nb = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    return diff / nb if nb > 0 else diff


def subgrid(values: np.ndarray, big: Grid3, small: Grid3) -> np.ndarray:
    """Restriction of samples on `big` to the aligned sub-lattice `small`."""
    off = (big.extent - small.extent) / big.h
    o = int(round(off))
    if (not math.isclose(big.h, small.h, rel_tol=1e-12) or abs(off - o) > 1e-8 or o < 0
            or o + small.n > big.n):
        raise ConfigError(f"grid (extent {small.extent}, n {small.n}) is not a sub-lattice of "
                          f"(extent {big.extent}, n {big.n})")
    return values[o:o + small.n, o:o + small.n, o:o + small.n]


def sobolev_norm(values: np.ndarray, grid: Grid3, s: float, homogeneous: bool = False) -> float:
    """L2 norm of the Fourier multiplier |xi|^s (or (1 + |xi|^2)^(s/2)) applied on the periodic grid."""
    k2 = grid.k_squared()
    mult = k2 ** (0.5 * s) if homogeneous else (1.0 + k2) ** (0.5 * s)
    if homogeneous and s < 0:
        mult = np.where(k2 > 0, mult, 0.0)
    return grid.norm(fft.ifftn(fft.fftn(values) * mult))


def random_packets(rng: np.random.Generator, count: int, sigma=(1.2, 2.0), k_max: float = 1.5,
                   center: float = 1.0) -> list[GaussianPacket]:
    """Gaussian packets with random width, carrier, and center."""
    out = []
    for _ in range(count):
        s = float(rng.uniform(*sigma))
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        k0 = float(rng.uniform(0.0, k_max)) * d
        c = rng.uniform(-center, center, size=3)
        out.append(GaussianPacket(s, tuple(float(v) for v in k0), tuple(float(v) for v in c)))
    return out


def _flag(ok: bool) -> float:
    """0 for a satisfied predicate, 1 otherwise; compared with mode 'le' against 0.5."""
    return 0.0 if ok else 1.0


def _finite(x: float) -> float:
    return 0.0 if math.isfinite(x) else 1.0


def _attractive(V: Potential, grid: Grid3) -> bool:
    return bool(np.min(grid_values(V, grid), initial=0.0) < 0.0)


class SuiteContext:
    """Lazily built objects shared by the suites of one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._memo: dict = {}

    def memo(self, key, build):
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    @property
    def packet(self) -> GaussianPacket:
        c = self.cfg
        return GaussianPacket(c.packet_sigma, tuple(c.packet_k0), tuple(c.packet_center))

    def point_set(self, refined: bool = False) -> PointSet:
        c = self.cfg
        spec = c.support_refined if refined else c.support
        return self.memo(("ps", refined), lambda: support_points(c.potential, spec.grid, c.support_threshold))

    def eta_grid(self) -> EtaGrid:
        c = self.cfg
        return self.memo("eta", lambda: EtaGrid.gauss(c.eta_k_max, c.eta_radii, c.eta_order))

    def t1_plus(self) -> EtaKernelFamily:
        return self.memo("t1_plus", lambda: t1_family(self.cfg.potential, self.eta_grid(), +1, self.point_set()))

    def tplus(self) -> EtaKernelFamily:
        """T+ on the base lattice; not cached, since a family stack is large."""
        return invert_family(self.t1_plus())

    def scattering(self) -> EtaKernelFamily:
        t1m = t1_family(self.cfg.potential, self.eta_grid(), -1, self.point_set())
        return scattering_family(self.cfg.potential, self.eta_grid(), self.point_set(), t1_plus=self.t1_plus(),
                                 t1_minus=t1m)

    def wave_many(self, functions, refined: bool = False) -> list[np.ndarray]:
        """W+ f on the (refined) output grid for each f, one radius at a time."""
        c = self.cfg
        og = (c.output_refined if refined else c.output).grid
        return apply_wave_many(c.potential, self.eta_grid(), self.point_set(refined), functions, og)

    def verdict(self):
        c = self.cfg
        return self.memo("verdict", lambda: zero_energy_check(c.potential, c.support.grid,
                                                              rel_support=c.support_threshold,
                                                              with_bound_states=False))

    def box_states(self) -> list:
        """Bound states on the time box (empty for nonnegative V)."""
        c = self.cfg
        box = c.box.grid
        return self.memo("box_states", lambda: bound_states(c.potential, box) if _attractive(c.potential, box)
                         else [])

    def box_packet(self) -> np.ndarray:
        box = self.cfg.box.grid
        return self.memo("box_packet", lambda: self.packet.sample(box))

    def time_wave(self):
        c = self.cfg
        return self.memo("time_wave", lambda: wave_limit(
            project_continuous(self.box_packet(), self.box_states(), c.box.grid), c.potential, c.box.grid,
            +1, T_max=c.T, dt=c.dt))

    def decomposition(self):
        """First-order structure decomposition of the configured V, long enough for the output grid."""
        c = self.cfg

        def build():
            t_max = self.packet.spatial_radius(1e-12) + math.sqrt(3.0) * c.output.extent
            profile = compute_l1(c.potential, t_grid=structure_t_grid(t_max, c.structure_dt))
            return profile, decompose_w1(profile, c.structure_order)
        return self.memo("structure", build)


def _generic_or_skip(ctx: SuiteContext, rep: Report) -> bool:
    d = ctx.verdict()
    rep.info["zero_energy"] = d.to_json()
    if d.verdict != "generic":
        rep.skipped = f"zero-energy verdict is {d.verdict!r}; the bounds assume generic type"
        return False
    return True


# ---- suites ------------------------------------------------------------------------------

def suite_ray_anchors(ctx: SuiteContext) -> Report:
    """Closed-form anchors of the ray transform for V = exp(-|x|^2)."""
    rep = Report("ray_anchors")
    V = gaussian(1.0, 1.0)
    t = np.array([0.0, 200.0])
    prof = compute_l1(V, t_grid=(t, np.ones(2)))
    origin_target = 2.0 * math.pi ** 1.5
    tail_target = -4.0 * math.pi ** 1.5          # t^2 L1(t w) -> -4 V^(0)
    L0, Lt = complex(prof.L1[0, 0]), complex(prof.L1[0, 1])
    rep.check("L1 at t=0 equals 2 pi^(3/2)", abs(L0 - origin_target) / origin_target, 0.0,
              ctx.cfg.tol("ray_origin"), "ray transform at the origin equals the integral of the Fourier transform "
              "weighted by |s|", "le")
    rep.check("t^2 L1 at t=200 approaches -4 pi^(3/2)", abs(t[1] ** 2 * Lt - tail_target) / abs(tail_target), 0.0,
              ctx.cfg.tol("ray_tail"), "large-t asymptotics of the ray transform, magnitude 4 V^(0)", "le")
    rep.table("values", ["quantity", "re", "im", "target"],
              [["L1(0)", L0.real, L0.imag, origin_target],
               ["t^2 L1(200)", (t[1] ** 2 * Lt).real, (t[1] ** 2 * Lt).imag, tail_target],
               ["leading term at 200", float(leading_term(V, 200.0)) * t[1] ** 2, 0.0, tail_target]])
    rep.info["extrapolation_residual"] = prof.residual
    return rep


def suite_plancherel(ctx: SuiteContext) -> Report:
    """L2 mass of L1 over (t, w) relative to ||V||_2^2, stable under refinement of the ray grid."""
    rep = Report("plancherel")
    pots = (
        ("gaussian", gaussian(1.0, 1.0), None),
        ("offset_gaussian", gaussian(1.0, 1.0, (0.5, -0.3, 0.2)), None),
        ("yukawa", yukawa(1.0, 1.0, 0.1), RayQuadConfig(tolerance=1e-2)),
    )
    rows = []
    for name, V, quad in pots:
        base = plancherel_check(compute_l1(V, quad=quad), V)
        fine = plancherel_check(compute_l1(V, omega_grid=default_omega_grid(V, 23),
                                           t_grid=default_t_grid(128, 128), quad=quad), V)
        rep.check(f"{name}: refined/base L2 ratio", fine.ratio, base.ratio, ctx.cfg.tol("plancherel_refinement"),
                  "L2 mass of the ray transform bounded by ||V^||_2^2", "rel")
        rows.append([name, base.lhs, base.rhs, base.ratio, fine.lhs, fine.ratio])
    rep.table("ratios", ["potential", "lhs_base", "rhs", "ratio_base", "lhs_refined", "ratio_refined"], rows)
    return rep


def suite_inverse_identity(ctx: SuiteContext) -> Report:
    """(I + T1)(I - T+) = I per eta, and T+ against the perturbed resolvent."""
    cfg = ctx.cfg
    rep = Report("inverse_identity")
    V = cfg.potential
    ps = ctx.point_set()
    # four points per wavelength on the support lattice caps the radii
    k_max = min(20.0, 0.999 * math.pi / (2.0 * ps.h))
    eg = EtaGrid.geometric(24, 0.05, k_max, cfg.eta_order)
    T1 = t1_family(V, eg, +1, ps)
    Tp = invert_family(T1)
    res = inverse_residuals(T1, Tp)
    rep.check("max per-eta residual of (I + T1)(I - T+) - I", float(np.max(res, initial=0.0)), 0.0,
              cfg.tol("inverse_residual"), "inverse identity (I + T1) o (I - T+) = I", "le")
    spots = sorted({0, len(eg) // 2, len(eg) - 1})
    worst = max(explicit_inverse_residual(T1, Tp, i) for i in spots) if len(ps) else 0.0
    rep.check("explicit per-eta residual at spot frequencies", worst, 0.0, cfg.tol("inverse_residual"),
              "inverse identity (I + T1) o (I - T+) = I", "le")
    rows = []
    cross = 0.0
    for j, k in enumerate(eg.radii):
        if not len(ps):
            break
        E = perturbed_resolvent(V, complex(k), ps).entries
        ref = ps.values[:, None] * E
        core = Tp.cores[j]
        err = float(np.max(np.abs(core - ref)) / max(np.max(np.abs(core)), 1e-300))
        cross = max(cross, err)
        rows.append([float(k), float(np.max(res[eg.radius_index == j])), err])
    rep.check("T+ against V (I + R0 V)^-1 R0", cross, 0.0, cfg.tol("inverse_crosscheck"),
              "T+ as V times the perturbed resolvent", "le")
    rep.table("per_radius", ["k", "inverse_residual", "resolvent_crosscheck"], rows)
    rep.info.update(n_points=len(ps), n_eta=len(eg), k_max=k_max)
    return rep


def _direct_second_born(V: Potential, ps: PointSet, eta: np.ndarray) -> np.ndarray:
    """T1 o T1 at one eta by explicit summation over the middle point (weights of x2 folded in)."""
    k = float(np.linalg.norm(eta))
    n = len(ps)
    pts = [tuple(map(float, p)) for p in ps.points]
    w = [float(v) for v in ps.weights]
    v = [float(x) for x in ps.values]
    diag = complex(self_cell_mean(k, ps.h))
    ph = [cmath.exp(1j * (p[0] * eta[0] + p[1] * eta[1] + p[2] * eta[2])) for p in pts]

    def t1(a, b):
        if a == b:
            g = diag
        else:
            r = math.dist(pts[a], pts[b])
            g = cmath.exp(1j * k * r) / (4.0 * math.pi * r)
        return ph[a] * v[a] * g * ph[b].conjugate()

    K = [[t1(a, b) for b in range(n)] for a in range(n)]
    out = np.empty((n, n), dtype=complex)
    for a in range(n):
        Ka = K[a]
        for c in range(n):
            out[a, c] = sum(Ka[b] * w[b] * K[b][c] for b in range(n)) * w[c]
    return out


def suite_algebra_laws(ctx: SuiteContext) -> Report:
    """Associativity and identity of the composition, and the second Born term by direct summation."""
    cfg = ctx.cfg
    rep = Report("algebra_laws")
    rng = np.random.default_rng(cfg.seed)
    n, m = 6, 4
    ps = PointSet(rng.normal(size=(n, 3)), rng.uniform(0.5, 1.5, n), 0.5, np.ones(n))
    eg = EtaGrid.from_points(rng.normal(size=(m, 3)))

    def family():
        mats = (rng.normal(size=(m, n, n)) + 1j * rng.normal(size=(m, n, n))) / n
        return EtaKernelFamily(eg, ps, +1, mats=mats)

    A, B, C = family(), family(), family()
    left = ostar(ostar(A, B), C).blocks()
    right = ostar(A, ostar(B, C)).blocks()
    rep.check("(A o B) o C = A o (B o C)", float(np.max(np.abs(left - right)) / np.max(np.abs(left))), 0.0,
              cfg.tol("associativity"), "associativity of the composition", "le")
    Id = identity_family(A)
    ident = max(float(np.max(np.abs(ostar(Id, A).blocks() - A.blocks()))),
                float(np.max(np.abs(ostar(A, Id).blocks() - A.blocks()))))
    rep.check("I o A = A o I = A", ident, 0.0, cfg.tol("identity"), "identity element of the composition", "le")

    V = gaussian(1.0, 1.0)
    toy = support_points(V, Grid3(1.0, 4))
    etas = rng.normal(size=(2, 3))
    etas *= (rng.uniform(0.3, 1.5, size=2) / np.linalg.norm(etas, axis=1))[:, None]
    eg2 = EtaGrid.from_points(etas)
    T1 = t1_family(V, eg2, +1, toy)
    T2 = ostar(T1, T1)
    worst = 0.0
    for i, eta in enumerate(eg2.points):
        direct = _direct_second_born(V, toy, eta)
        worst = max(worst, float(np.max(np.abs(T2.matrix(i) - direct)) / np.max(np.abs(direct))))
    rep.check("T1 o T1 against direct summation", worst, 0.0, cfg.tol("born_quadrature"),
              "second Born kernel as an integral over the middle point", "le")
    rep.info.update(toy_points=len(toy), random_family_shape=[m, n, n])
    return rep


def suite_resonance_scan(ctx: SuiteContext) -> Report:
    """Zero-energy singular values along V_c = c * V_unit, critical coupling, and Neumann onset."""
    cfg = ctx.cfg
    rep = Report("resonance_scan")
    unit = cfg.resonance_unit
    grid = cfg.resonance_grid.grid
    ps = support_points(unit, grid)
    cs = np.linspace(0.0, cfg.resonance_c_max, cfg.resonance_points)
    svals = [min_singular_value(replace(ps, values=c * ps.values)) for c in cs]
    rep.table("singular_values", ["c", "min_singular_value"], [[float(c), s] for c, s in zip(cs, svals)])
    rep.check("c = 0 is generic: min singular value 1", svals[0], 1.0, 1e-12,
              "I + R0(0) V invertible at zero coupling", "abs")
    c_bs = birman_schwinger_couplings(unit, grid)[0]
    if unit.radial:
        c_ref = critical_couplings(unit, cfg.resonance_c_max)[0]
        rep.check("grid critical coupling against radial shooting", c_bs, c_ref, cfg.tol("critical_coupling"),
                  "zero-energy resonance: f = -R0(0) V f has a bounded solution", "rel")
    else:
        c_ref = c_bs
        rep.info["oracle"] = "no radial shooting oracle for a non-radial family"
    if unit.kind == "square_well":
        closed = math.pi ** 2 / (4.0 * unit.param("radius") ** 2 * unit.param("depth"))
        rep.check("grid critical coupling against pi^2 / 4", c_bs, closed, cfg.tol("critical_coupling"),
                  "zero-energy resonance of the square well at c R^2 = pi^2 / 4", "rel")
    k_top = min(1.0, 0.9 * math.pi / (2.0 * ps.h))
    eg = EtaGrid.geometric(6, 0.05, k_top, 17)
    c_n = neumann_divergence_coupling(unit, eg, ps)
    rep.check("Neumann onset against critical coupling", c_n, c_ref, cfg.tol("neumann_onset"),
              "the Born series may diverge near a zero-energy resonance", "rel")
    # the onset is set by the radius with the largest spectral radius; demonstrate there
    T1 = t1_family(unit, eg, +1, ps)
    j = int(np.argmax(spectral_radii(T1)))
    T1j = t1_family(unit, EtaGrid.from_points([[0.0, 0.0, float(eg.radii[j])]]), +1, ps)
    try:
        invert_family(T1j.scaled(1.05 * c_n), "neumann", max_terms=200, failover_radius=math.inf)
        diverged = False
    except DivergenceError:
        diverged = True
    rep.check("Neumann strategy fails at 1.05 x onset", _flag(diverged), 0.0, 0.5,
              "the Born series may diverge near a zero-energy resonance", "le")
    below = T1j.scaled(0.95 * c_n)
    Tp = invert_family(below, "neumann", max_terms=1000, tol=1e-10, failover_radius=math.inf)
    rep.check("Neumann strategy converges at 0.95 x onset", float(np.max(inverse_residuals(below, Tp))), 0.0,
              1e-8, PLUMBING, "le")
    up = neumann_partial_sums(1.05 * c_n * T1.blocks()[j], 60)
    down = neumann_partial_sums(0.95 * c_n * T1.blocks()[j], 60)
    rep.table("neumann_terms", ["term", "norm_above_onset", "norm_below_onset"],
              [[i + 1, a, b] for i, (a, b) in enumerate(zip(up, down))])
    rep.info.update(c_grid=c_bs, c_reference=c_ref, c_neumann=c_n, n_points=len(ps),
                    onset_radius=float(eg.radii[j]), scan_argmin=float(cs[int(np.argmin(svals))]))
    return rep


def suite_structure_equivalence(ctx: SuiteContext) -> Report:
    """First-order W+ three ways: structure atoms, frequency oracle, time-limit extraction."""
    cfg = ctx.cfg
    rep = Report("structure_equivalence")
    V, f = cfg.potential, ctx.packet
    og, fg, box = cfg.output.grid, cfg.f_grid.grid, cfg.box.grid
    profile, D = ctx.decomposition()
    ws = apply_structure(D, f.sample(fg), fg, og.points(), carrier=f.k0).reshape(og.shape)
    wt = subgrid(first_order_limit(ctx.box_packet(), V, box, +1, cfg.T, cfg.dt), box, og)
    try:
        wo = born_on_grid(V, f, og) if not V.is_zero else np.zeros(og.shape, dtype=complex)
    except DomainError as exc:
        wo = None
        rep.info["oracle"] = f"frequency oracle unavailable: {exc}"
    if wo is not None:
        rep.check("structure route against frequency oracle", relative_error(ws, wo), 0.0,
                  cfg.tol("structure_vs_oracle"), "first Born term of W+ as a superposition of elementary "
                  "transformations", "le")
        rep.check("time limit against frequency oracle", relative_error(wt, wo), 0.0, cfg.tol("structure_vs_time"),
                  "first Born term of W+ in frequency space", "le")
    rep.check("structure route against time limit", relative_error(ws, wt), 0.0, cfg.tol("structure_vs_time"),
              "first Born term of W+ as a superposition of elementary transformations", "le")
    split = asymptotic_split(D, V)
    lead = leading_term(V, profile.t)
    rep.table("ray_profile", ["t", "re_L1", "im_L1", "re_L1_tilde", "im_L1_tilde", "leading"],
              [[float(t), complex(a).real, complex(a).imag, complex(b).real, complex(b).imag, float(c)]
               for t, a, b, c in zip(profile.t, profile.L1[0], profile.L1_tilde[0], lead)])
    rep.info.update(n_atoms=len(D), mass=D.mass, digest=D.digest(), remainder_weighted_mass=split.remainder_weighted_mass,
                    profile_residual=profile.residual, first_order_norm=og.norm(ws))
    return rep


def suite_wave_operator(ctx: SuiteContext) -> Report:
    """Isometry and intertwining of the time-limit W+, and the kernel route against it."""
    cfg = ctx.cfg
    rep = Report("wave_operator")
    V, f = cfg.potential, ctx.packet
    box, og = cfg.box.grid, cfg.output.grid
    states = ctx.box_states()
    fb = project_continuous(ctx.box_packet(), states, box)
    wl = ctx.time_wave()
    rep.table("cauchy_residuals", ["T", "residual"], [[float(t), r] for t, r in zip(wl.times[1:], wl.residuals)])
    rep.check("time-limit isometry drift", abs(box.norm(wl.values) / box.norm(fb) - 1.0), 0.0,
              cfg.tol("isometry"), "W+ is an isometry on the continuous subspace", "le")
    s = cfg.intertwining_s
    lhs = propagate(wl.values, V, box, s, cfg.dt)
    g = free_propagate(fb, box, s)
    rhs = wave_limit(g, V, box, +1, schedule=(cfg.T,), dt=cfg.dt, strict=False).values
    rep.check(f"intertwining residual at s = {s:g}", box.norm(lhs - rhs) / box.norm(fb), 0.0,
              cfg.tol("intertwining"), "intertwining e^{-isH} W+ = W+ e^{-isH0}", "le")
    wk = apply_wave(ctx.tplus(), f, og)
    wt = subgrid(wl.values, box, og)
    fo = f.sample(og)
    rep.check("kernel route against time limit", relative_error(wk, wt), 0.0, cfg.tol("kernel_vs_time"),
              "W+ = I - R0 V (I + R0 V)^-1 on incoming waves", "le")
    rep.info.update(relative_error_w_minus_identity=relative_error(wk - fo, wt - fo),
                    kernel_isometry_drift=abs(og.norm(wk) / og.norm(fo) - 1.0),
                    norm_drift=wl.norm_drift, bound_states=[float(e) for e, _ in states],
                    n_points=len(ctx.point_set()))
    return rep


def suite_scattering(ctx: SuiteContext) -> Report:
    """S = W-^* W+ two ways: identity at V = 0, agreement, annulus leakage, unitarity, Born amplitude."""
    cfg = ctx.cfg
    rep = Report("scattering")
    if not _generic_or_skip(ctx, rep):
        return rep
    V, f = cfg.potential, ctx.packet
    box, og = cfg.box.grid, cfg.output.grid
    fo, fb = f.sample(og), ctx.box_packet()
    S0 = scattering_family(zero(), ctx.eta_grid(), cfg.support.grid)
    rep.check("V = 0: kernel route returns f", float(np.max(np.abs(apply_scattering(S0, f, og) - fo))), 0.0,
              cfg.tol("identity_scattering"), "S = I without a potential", "le")
    rep.check("V = 0: time route returns f",
              float(np.max(np.abs(scattering_limit(fb, zero(), box, cfg.T, cfg.dt) - fb))), 0.0,
              cfg.tol("identity_scattering"), "S = I without a potential", "le")
    sk = apply_scattering(ctx.scattering(), f, og)
    st_box = scattering_limit(fb, V, box, cfg.T, cfg.dt)
    st = subgrid(st_box, box, og)
    rep.check("kernel route against time route", relative_error(sk, st), 0.0, cfg.tol("scattering_agreement"),
              "S = W-^* W+", "le")
    rep.check("kernel-route unitarity drift", abs(og.norm(sk) / og.norm(fo) - 1.0), 0.0, cfg.tol("unitarity"),
              "S is unitary", "le")
    rep.check("time-route unitarity drift", abs(box.norm(st_box) / box.norm(fb) - 1.0), 0.0, cfg.tol("unitarity"),
              "S is unitary", "le")
    fa, ga = AnnulusFunction(0.6, 1.2), AnnulusFunction(1.5, 2.1)
    TS = scattering_family(V, EtaGrid.gauss(fa.k_outer, 12, cfg.eta_order, k_min=fa.k_inner), ctx.point_set())
    leak = annulus_leakage(TS, fa, ga, box)
    rep.check("annulus leakage, Fourier pairing", leak.fourier_pairing, 0.0, cfg.tol("leakage"),
              "S commutes with H0 and acts on each energy shell", "le")
    rep.check("annulus leakage, grid pairing", leak.grid_pairing, 0.0, cfg.tol("leakage"),
              "S commutes with H0 and acts on each energy shell", "le")
    V01 = gaussian(0.1, 1.0)
    ps01 = support_points(V01, cfg.support.grid, cfg.support_threshold)
    z = (0.0, 0.0, 1.0)
    born = born_amplitude(V01, 1.0, z, z, ps01)
    target = -0.1 * SQRT_PI / 4.0
    rep.check("first Born forward amplitude, V = 0.1 exp(-|x|^2)", born.real, target, cfg.tol("born_amplitude"),
              "first Born amplitude -V^(0) / (4 pi)", "rel")
    full = scattering_amplitude(V01, 1.0, z, z, ps01, coupling=1.0)
    profile, _ = ctx.decomposition()
    D1 = decompose_s1(profile, cfg.structure_order)
    gap = float(np.max(np.abs(D1.coeff_minus - D1.coeff_plus), initial=0.0))
    scale = float(np.max(np.abs(D1.coeff_minus), initial=0.0))
    rep.info.update(
        relative_error_s_minus_identity=relative_error(sk - fo, st - fo),
        born_amplitude=[born.real, born.imag], full_amplitude=[full.real, full.imag],
        born_target=target, leakage_norms=[leak.f_norm, leak.g_norm],
        s1_half_space_gap=gap / scale if scale else 0.0)
    return rep


def _lp_ratios(w: np.ndarray, f: np.ndarray, grid: Grid3, weight=None) -> dict:
    out = {}
    for p in (1.0, 2.0, math.inf):
        num = grid.norm(w if weight is None else w * weight, p)
        out[p] = num / grid.norm(f, p)
    return out


def _p_label(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


def suite_lp_bounds(ctx: SuiteContext) -> Report:
    """Empirical L^p operator-norm proxies of W+ on random packets, base and refined grids."""
    cfg = ctx.cfg
    rep = Report("lp_bounds")
    if not _generic_or_skip(ctx, rep):
        return rep
    rng = np.random.default_rng(cfg.seed)
    packets = random_packets(rng, cfg.n_functions)
    rows, worst = [], {}
    sob = 0.0
    for label, refined in (("base", False), ("refined", True)):
        og = (cfg.output_refined if refined else cfg.output).grid
        for i, (f, w) in enumerate(zip(packets, ctx.wave_many(packets, refined))):
            fv = f.sample(og)
            for p, r in _lp_ratios(w, fv, og).items():
                rows.append([label, i, _p_label(p), r])
                worst[label, p] = max(worst.get((label, p), 0.0), r)
            if not refined:
                sob = max(sob, sobolev_norm(w, og, 0.25, True) / sobolev_norm(fv, og, 0.25, True))
    _, D = ctx.decomposition()
    for p in (1.0, 2.0, math.inf):
        b, r = worst["base", p], worst["refined", p]
        rep.check(f"p = {_p_label(p)}: ratios finite", _finite(b) + _finite(r), 0.0, 0.5,
                  "W+ bounded on L^p", "le")
        rep.check(f"p = {_p_label(p)}: refinement stability", r, b, cfg.tol("refinement"), "W+ bounded on L^p", "rel")
    rep.check("p = inf: ratio within 1 + mass of the first-order atoms", worst["base", math.inf], 0.0,
              1.0 + D.mass, "first-order structure mass bounds the L^inf norm", "le")
    rep.check("homogeneous H^(1/4) ratio finite", _finite(sob), 0.0, 0.5, "W+ bounded on Sobolev spaces", "le")
    # first-order structure route on the first packets
    fg, og = cfg.f_grid.grid, cfg.output.grid
    srows = []
    for i, f in enumerate(packets[:2]):
        fv = f.sample(og)
        w1 = apply_structure(D, f.sample(fg), fg, og.points(), carrier=f.k0).reshape(og.shape)
        for p, r in _lp_ratios(fv + w1, fv, og).items():
            srows.append([i, _p_label(p), r])
    rep.table("ratios", ["grid", "function", "p", "ratio"], rows)
    rep.table("structure_ratios", ["function", "p", "first_order_ratio"], srows)
    rep.table("constants", ["grid", "p", "max_ratio"],
              [[g, _p_label(p), v] for (g, p), v in sorted(worst.items(), key=lambda kv: (kv[0][0], kv[0][1]))])
    rep.info.update(structure_mass=D.mass, sobolev_quarter_ratio=sob,
                    packets=[[f.sigma, *f.k0, *f.center] for f in packets])
    return rep


def suite_weighted_bounds(ctx: SuiteContext) -> Report:
    """Ratios ||<x>^-b W+ (<x>^b f)||_p / ||f||_p for the configured weights b."""
    cfg = ctx.cfg
    rep = Report("weighted_bounds")
    if not _generic_or_skip(ctx, rep):
        return rep
    alpha = cfg.weighted_alpha
    wnorm = weighted_l2_norm(cfg.potential, alpha)
    rep.check(f"<x>^{alpha:g} V in L2", _finite(wnorm), 0.0, 0.5, "weighted decay hypothesis on V", "le")
    bad = [b for b in cfg.weighted_betas if not 0 <= b < alpha - 0.5]
    if bad:
        raise ConfigError(f"weights {bad} must lie in [0, alpha - 1/2)")
    rng = np.random.default_rng(cfg.seed + 1)
    packets = random_packets(rng, min(4, cfg.n_functions), sigma=(1.2, 1.6))
    worst, rows = {}, []
    for label, refined in (("base", False), ("refined", True)):
        og = (cfg.output_refined if refined else cfg.output).grid
        jx = np.sqrt(1.0 + og.radius() ** 2)
        jobs = [(beta, i, f) for beta in cfg.weighted_betas for i, f in enumerate(packets)]
        images = ctx.wave_many([SampledFunction(og, jx ** beta * f.sample(og)) for beta, _, f in jobs], refined)
        for (beta, i, f), w in zip(jobs, images):
            for p, r in _lp_ratios(w, f.sample(og), og, weight=jx ** -beta).items():
                rows.append([label, beta, i, _p_label(p), r])
                worst[label, beta, p] = max(worst.get((label, beta, p), 0.0), r)
    monotone = {}
    for p in (1.0, 2.0, math.inf):
        seq = [worst["base", b, p] for b in cfg.weighted_betas]
        monotone[_p_label(p)] = bool(all(b >= a for a, b in zip(seq, seq[1:])))
        for beta in cfg.weighted_betas:
            b, r = worst["base", beta, p], worst["refined", beta, p]
            rep.check(f"beta = {beta:g}, p = {_p_label(p)}: ratios finite", _finite(b) + _finite(r), 0.0, 0.5,
                      "W+ bounded on weighted L^p", "le")
            rep.check(f"beta = {beta:g}, p = {_p_label(p)}: refinement stability", r, b, cfg.tol("refinement"),
                      "W+ bounded on weighted L^p", "rel")
    rep.table("ratios", ["grid", "beta", "function", "p", "ratio"], rows)
    rep.table("constants", ["grid", "beta", "p", "max_ratio"],
              [[g, b, _p_label(p), v] for (g, b, p), v in sorted(worst.items(), key=lambda kv: kv[0])])
    rep.info.update(weighted_potential_norm=wnorm, monotone_in_beta=monotone, alpha=alpha)
    return rep


def _stable_step(grid: Grid3, dt: float) -> float:
    """Largest dt / 2^j that passes the spectral step limit."""
    while True:
        try:
            check_step(grid, dt)
            return dt
        except StepSizeError:
            dt /= 2.0


def suite_multilinear(ctx: SuiteContext) -> Report:
    """|int_0^T int U (e^{-itH} P_c f)^2| / (||f||_{H^-1}^2 ||U||_{L^inf cap L^3/2}) over T."""
    cfg = ctx.cfg
    rep = Report("multilinear")
    if not _generic_or_skip(ctx, rep):
        return rep
    V = cfg.potential
    Upot = gaussian(1.0, 1.0)
    # a real packet: e^{itH} f and e^{-itH} f are then complex conjugates, so |integral| agrees
    f = GaussianPacket(cfg.packet_sigma, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    times = tuple(sorted(cfg.multilinear_times))
    ratios, rows, info = {}, [], {}
    for label, spec in (("base", cfg.multilinear_box), ("refined", cfg.multilinear_box_refined)):
        grid = spec.grid
        dt = _stable_step(grid, cfg.multilinear_dt)
        states = bound_states(V, grid) if _attractive(V, grid) else []
        fv = project_continuous(f.sample(grid), states, grid)
        Uv = grid_values(Upot, grid)
        res = quadratic_time_integral(fv, V, grid, Uv, times, dt)
        denom = sobolev_norm(fv, grid, -1.0) ** 2 * max(grid.norm(Uv, math.inf), grid.norm(Uv, 1.5))
        for T in times:
            ratios[label, T] = abs(res[T]) / denom
            rows.append([label, T, res[T].real, res[T].imag, ratios[label, T]])
        info[label] = {"dt": dt, "boundary_fraction": res["boundary"],
                       "truncation_warning": bool(res["boundary"] > 1e-6), "denominator": denom}
        if label == "base":
            doubled = quadratic_time_integral(2.0 * fv, V, grid, Uv, times[:1], dt)[times[0]]
            rep.check("doubling f quadruples the integral", abs(doubled / res[times[0]] - 4.0) / 4.0, 0.0,
                      cfg.tol("bilinear"), "the form is quadratic in f", "le")
    for (label, T), r in sorted(ratios.items()):
        rep.check(f"{label} T = {T:g}: ratio finite", _finite(r), 0.0, 0.5,
                  "multilinear bound by ||f||_{H^-1}^2 ||U||_{L^inf cap L^3/2}", "le")
    t_last, t_prev = times[-1], times[-2] if len(times) > 1 else times[-1]
    rep.check(f"plateau in T: ratio at {t_last:g} against {t_prev:g}", ratios["base", t_last], ratios["base", t_prev],
              cfg.tol("refinement"), "time integral converges as T grows", "rel")
    rep.check(f"refinement stability at T = {t_last:g}", ratios["refined", t_last], ratios["base", t_last],
              cfg.tol("refinement"), "multilinear bound by ||f||_{H^-1}^2 ||U||_{L^inf cap L^3/2}", "rel")
    rep.table("integrals", ["grid", "T", "re_integral", "im_integral", "ratio"], rows)
    rep.info.update(info)
    return rep


SUITE_FUNCTIONS = {
    "ray_anchors": suite_ray_anchors,
    "plancherel": suite_plancherel,
    "inverse_identity": suite_inverse_identity,
    "algebra_laws": suite_algebra_laws,
    "resonance_scan": suite_resonance_scan,
    "structure_equivalence": suite_structure_equivalence,
    "wave_operator": suite_wave_operator,
    "scattering": suite_scattering,
    "lp_bounds": suite_lp_bounds,
    "weighted_bounds": suite_weighted_bounds,
    "multilinear": suite_multilinear,
}


def run_suite(name: str, ctx: SuiteContext) -> Report:
    if name not in SUITE_FUNCTIONS:
        raise ConfigError(f"unknown suite {name!r}")
    return SUITE_FUNCTIONS[name](ctx)
