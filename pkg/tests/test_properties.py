"""Property tests for the invariants each module promises."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavescatter.greens import kernel_matrix, support_points, zero_energy_check
from wavescatter.grids import Grid3
from wavescatter.kernel_algebra import EtaGrid, EtaKernelFamily, identity_family, ostar
from wavescatter.greens import PointSet
from wavescatter.potential_lab import b_norm, fourier_on_ray, gaussian, l1_norm, square_well, sum_of, yukawa
from wavescatter.propagator import duhamel_residual, evolve, project_continuous, propagate
from wavescatter.grids import default_t_grid
from wavescatter.ray_transform import RayQuadConfig, compute_l1, l1_mass
from wavescatter.testfuncs import GaussianPacket

amplitudes = st.floats(-3.0, 3.0).filter(lambda a: abs(a) > 1e-3)
widths = st.floats(0.5, 2.0)
centers = st.tuples(*[st.floats(-1.0, 1.0)] * 3)


@st.composite
def potentials(draw):
    kind = draw(st.sampled_from(["gaussian", "square_well", "yukawa"]))
    c = draw(centers)
    if kind == "gaussian":
        return gaussian(draw(amplitudes), draw(widths), c)
    if kind == "square_well":
        return square_well(draw(amplitudes), draw(widths), c)
    return yukawa(draw(amplitudes), draw(st.floats(0.5, 2.0)), draw(st.floats(0.1, 0.5)))


def unit_vectors():
    return st.tuples(*[st.floats(-1.0, 1.0)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1).map(
        lambda v: np.asarray(v) / np.linalg.norm(v))


# ---- potentials -------------------------------------------------------------------

@given(st.floats(-4.0, 4.0), amplitudes, widths)
def test_b_norm_is_absolutely_homogeneous(c, a, w):
    V = gaussian(a, w)
    assert b_norm(V.scaled(c)) == pytest.approx(abs(c) * b_norm(V), rel=1e-12, abs=1e-300)


@settings(max_examples=10)
@given(amplitudes, widths, amplitudes, widths)
def test_b_norm_triangle_inequality(a1, w1, a2, w2):
    V1, V2 = gaussian(a1, w1), square_well(a2, w2)
    assert b_norm(sum_of(V1, V2)) <= (b_norm(V1) + b_norm(V2)) * (1 + 1e-12)


@given(potentials(), st.integers(-3, 3))
def test_b_norm_dyadic_dilation_invariance(V, m):
    if not V.radial:
        V = V.scaled(1.0)
    assert b_norm(V.dilated(2.0 ** m)) == pytest.approx(b_norm(V), rel=1e-9)


@given(potentials(), unit_vectors(), st.floats(0.0, 20.0))
def test_transform_bounded_by_l1_and_hermitian(V, omega, s):
    vals = fourier_on_ray(V, omega, [s, -s])
    assert abs(vals[0]) <= l1_norm(V) * (1 + 1e-9)
    assert vals[1] == pytest.approx(np.conj(vals[0]), rel=1e-12, abs=1e-12)


@settings(max_examples=4)
@given(st.floats(0.3, 2.0), st.floats(0.7, 1.5))
def test_ray_mass_dilation_invariance(a, w):
    # alpha^2 V(alpha x) has L1(t / alpha) = alpha L1(t) once eps is divided by alpha
    V = gaussian(a, w)
    t, wt = default_t_grid()
    cfg = RayQuadConfig()
    scaled = RayQuadConfig(eps_sequence=tuple(0.5 * e for e in cfg.eps_sequence))
    m0 = l1_mass(compute_l1(V, t_grid=(t, wt), quad=cfg))
    m1 = l1_mass(compute_l1(V.dilated(2.0), t_grid=(t / 2.0, wt / 2.0), quad=scaled))
    assert m1 == pytest.approx(m0, rel=1e-6)


# ---- resolvents ---------------------------------------------------------------------

@settings(max_examples=8)
@given(st.floats(0.2, 3.0))
def test_resolvent_jump_is_positive_semidefinite(lam):
    g = Grid3(1.0, 6)
    pts, h = g.points(), g.h
    jump = (kernel_matrix(lam, pts, pts, h) - kernel_matrix(-lam, pts, pts, h).conj()) / 1j
    # R0(lam^2 - i0) has kernel conj(exp(i lam r)) / (4 pi r); the jump is sin(lam r) / (2 pi r)
    J = jump * g.cell_volume
    np.testing.assert_allclose(J, J.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(J).min() >= -1e-10 * np.abs(J).max()


@settings(max_examples=3)
@given(st.floats(0.05, 0.3))
def test_zero_energy_verdict_dyadic_invariance(a):
    V = gaussian(a, 1.0)
    d1 = zero_energy_check(V, Grid3(2.0, 8), with_bound_states=False)
    d2 = zero_energy_check(V.dilated(2.0), Grid3(1.0, 8), with_bound_states=False)
    assert d1.verdict == d2.verdict
    assert d2.min_singular_value == pytest.approx(d1.min_singular_value, rel=1e-10)


# ---- kernel algebra -----------------------------------------------------------------

@st.composite
def family_triples(draw):
    seed = draw(st.integers(0, 2 ** 31 - 1))
    n = draw(st.integers(1, 6))
    m = draw(st.integers(1, 4))
    rng = np.random.default_rng(seed)
    ps = PointSet(rng.normal(size=(n, 3)), rng.uniform(0.5, 1.5, n), 0.5, np.ones(n))
    eg = EtaGrid.from_points(rng.normal(size=(m, 3)))

    def fam():
        return EtaKernelFamily(eg, ps, +1, mats=rng.normal(size=(m, n, n)) + 1j * rng.normal(size=(m, n, n)))

    return fam(), fam(), fam()


@given(family_triples())
def test_composition_is_associative_with_identity(fams):
    A, B, C = fams
    left = ostar(ostar(A, B), C).blocks()
    right = ostar(A, ostar(B, C)).blocks()
    assert np.abs(left - right).max() <= 1e-12 * np.abs(left).max()
    np.testing.assert_array_equal(ostar(A, identity_family(A)).blocks(), A.blocks())


# ---- propagator ----------------------------------------------------------------------

packets = st.builds(
    GaussianPacket,
    sigma=st.floats(0.9, 1.6),
    k0=st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(-0.6, 0.6)),
    center=st.tuples(*[st.floats(-0.5, 0.5)] * 3),
)
BOX = Grid3(16.0, 64)


# wide, slow packets stay resolved on BOX and away from its walls up to t = 1
free_packets = st.builds(
    GaussianPacket,
    sigma=st.floats(1.2, 1.6),
    k0=st.tuples(*[st.floats(-0.3, 0.3)] * 3),
    center=st.tuples(*[st.floats(-0.5, 0.5)] * 3),
)


@settings(max_examples=5)
@given(free_packets, st.floats(0.1, 1.0))
def test_free_packet_closed_form(p, t):
    u = propagate(p.sample(BOX), None, BOX, t, t)
    exact = p.free_evolution(BOX.points(), t).reshape(BOX.shape)
    assert np.abs(u - exact).max() <= 1e-10


@settings(max_examples=4)
@given(packets, st.floats(0.1, 1.0))
def test_norm_conservation(p, a):
    prop = evolve(p.sample(BOX), gaussian(a, 1.0), BOX, 1.0, 1 / 32)
    assert prop.conserved_norm_drift <= 1e-8


@settings(max_examples=3)
@given(packets, st.floats(0.2, 1.0))
def test_splitting_is_second_order(p, a):
    g = Grid3(12.0, 48)
    f = p.sample(g)
    V = gaussian(a, 1.0)
    ref = propagate(f, V, g, 1.0, 1 / 256)
    e1 = g.norm(propagate(f, V, g, 1.0, 1 / 16) - ref)
    e2 = g.norm(propagate(f, V, g, 1.0, 1 / 32) - ref)
    assert e1 / e2 == pytest.approx(4.0, rel=0.15)


@settings(max_examples=2)
@given(packets, st.floats(0.2, 1.0))
def test_duhamel_residual(p, a):
    g = Grid3(12.0, 48)
    assert duhamel_residual(p.sample(g), gaussian(a, 1.0), g, 1.0, 1 / 64, 32) <= 1e-4


@settings(max_examples=3)
@given(st.floats(1.0, 1.5))
def test_dispersive_exponent_matches_closed_form(sigma):
    from wavescatter.propagator import dispersive_decay_check
    g = Grid3(32.0, 64)
    times = np.array([2.0, 4.0, 8.0])
    f = GaussianPacket(sigma, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)).sample(g)
    # the free Gaussian peak decays as (1 + (2t / sigma^2)^2)^(-3/4)
    exact = np.polyfit(np.log(times), -0.75 * np.log1p((2.0 * times / sigma ** 2) ** 2), 1)[0]
    rep = dispersive_decay_check(f, None, g, times)
    assert rep.exponent == pytest.approx(exact, abs=1e-2)
    assert -1.5 <= rep.exponent < -1.0


@settings(max_examples=5)
@given(st.integers(0, 2 ** 31 - 1))
def test_projection_idempotent(seed):
    g = Grid3(2.0, 8)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(g.size, 2)))
    states = [(-1.0, (q[:, j] / math.sqrt(g.cell_volume)).reshape(g.shape)) for j in range(2)]
    f = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    once = project_continuous(f, states, g)
    np.testing.assert_allclose(project_continuous(once, states, g), once, atol=1e-12 * np.abs(f).max())
