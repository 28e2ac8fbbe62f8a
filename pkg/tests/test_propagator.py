import numpy as np
import pytest

from wavescatter.errors import DomainError, NonConvergenceError, StepSizeError
from wavescatter.greens import bound_states
from wavescatter.grids import Grid3
from wavescatter.potential_lab import gaussian, square_well
from wavescatter.propagator import (dispersive_decay_check, duhamel_residual, evolve, first_order_limit,
                                    free_propagate, project_continuous, propagate, quadratic_time_integral,
                                    scattering_limit, wave_limit)
from wavescatter.testfuncs import GaussianPacket

G = Grid3(16.0, 64)
PACKET = GaussianPacket(1.2, (0.5, 0.0, 0.0), (0.0, 0.0, 0.0))
V = gaussian(0.5, 1.0)


def test_free_packet_matches_closed_form_at_any_step():
    f = PACKET.sample(G)
    for dt in (0.25, 1.0):
        u = propagate(f, None, G, 1.0, dt)
        exact = PACKET.free_evolution(G.points(), 1.0).reshape(G.shape)
        assert np.abs(u - exact).max() <= 1e-10


def test_second_order_splitting():
    f = PACKET.sample(G)
    ref = propagate(f, V, G, 1.0, 1 / 256)
    e1 = G.norm(propagate(f, V, G, 1.0, 1 / 16) - ref)
    e2 = G.norm(propagate(f, V, G, 1.0, 1 / 32) - ref)
    assert e1 / e2 == pytest.approx(4.0, rel=0.1)


def test_norm_conservation_and_snapshots():
    p = evolve(PACKET.sample(G), V, G, 1.0, 1 / 64, snapshot_times=(0.0, 0.5, 1.0))
    assert p.conserved_norm_drift <= 1e-8
    assert [s for s, _ in p.snapshots] == [0.0, 0.5, 1.0]
    back = propagate(p.final, V, G, -1.0, 1 / 64)
    np.testing.assert_allclose(back, PACKET.sample(G), atol=1e-12)


def test_duhamel_residual():
    assert duhamel_residual(PACKET.sample(G), V, G, 1.0, 1 / 64, 32) <= 1e-4


def test_step_limit_and_step_count():
    with pytest.raises(StepSizeError):
        propagate(PACKET.sample(G), V, G, 1.0, 0.25)
    with pytest.raises(DomainError):
        propagate(PACKET.sample(G), V, G, 1.0, 0.3)


def test_free_dispersion_exponent():
    g = Grid3(32.0, 64)
    f = GaussianPacket(1.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)).sample(g)
    rep = dispersive_decay_check(f, None, g, [2.0, 4.0, 8.0])
    assert rep.exponent == pytest.approx(-1.5, abs=0.1)


def test_bound_state_does_not_disperse():
    g = Grid3(4.0, 24)
    e, psi = bound_states(square_well(8.0, 1.0), g)[0]
    rep = dispersive_decay_check(psi.astype(complex), square_well(8.0, 1.0), g, [0.5, 1.0, 2.0], dt=1 / 128)
    assert abs(rep.exponent) < 0.05


def test_projection_is_orthogonal_and_idempotent():
    g = Grid3(4.0, 24)
    states = bound_states(square_well(8.0, 1.0), g)
    f = GaussianPacket(0.8, (0.0, 0.0, 0.0), (0.2, 0.0, 0.0)).sample(g)
    once = project_continuous(f, states, g)
    np.testing.assert_allclose(project_continuous(once, states, g), once, atol=1e-12)
    for _, psi in states:
        assert abs(g.inner(psi, once)) <= 1e-10
    h = GaussianPacket(1.1, (0.3, 0.0, 0.0), (0.0, -0.4, 0.0)).sample(g)
    # symmetric: <P f, h> = <f, P h>
    assert g.inner(once, h) == pytest.approx(g.inner(f, project_continuous(h, states, g)), abs=1e-12)
    np.testing.assert_array_equal(project_continuous(f, [], g), f)


def test_wave_limit_for_zero_potential_is_exact():
    f = PACKET.sample(G)
    wl = wave_limit(f, None, G, T_max=4.0, dt=1 / 16)
    np.testing.assert_allclose(wl.values, f, atol=1e-12)
    assert max(wl.residuals) <= 1e-12


def test_wave_limit_residuals_decrease_and_isometry():
    g = Grid3(24.0, 96)
    f = GaussianPacket(1.5, (1.0, 0.0, 0.0), (0.0, 0.0, 0.0)).sample(g)
    wl = wave_limit(f, gaussian(0.2, 1.0), g, T_max=4.0, dt=1 / 16)
    assert wl.converged and wl.residuals[1] < wl.residuals[0]
    assert abs(g.norm(wl.values) / g.norm(f) - 1) <= 1e-3
    with pytest.raises(NonConvergenceError):
        wave_limit(f, gaussian(0.2, 1.0), g, schedule=(1.0, 1.5, 4.0), dt=1 / 16)


def test_first_order_extraction_is_linear_in_v():
    g = Grid3(12.0, 48)
    f = PACKET.sample(g)
    a = first_order_limit(f, V, g, T=2.0, dt=1 / 16)
    b = first_order_limit(f, V.scaled(2.0), g, T=2.0, dt=1 / 16)
    np.testing.assert_allclose(b, 2 * a, atol=1e-6 * np.abs(a).max())


def test_scattering_limit_for_zero_potential():
    f = PACKET.sample(G)
    np.testing.assert_allclose(scattering_limit(f, None, G, T=2.0), f, atol=1e-12)


def test_quadratic_time_integral_matches_snapshots():
    g = Grid3(8.0, 32)
    f = PACKET.sample(g)
    w = np.ones(g.shape)
    dt = 1 / 16
    out = quadratic_time_integral(f, V, g, w, (0.5,), dt)
    snaps = evolve(f, V, g, 0.5, dt, snapshot_times=[k * dt for k in range(9)]).snapshots
    vals = [complex(np.sum(u * u) * g.cell_volume) for _, u in snaps]
    expect = dt * (sum(vals) - 0.5 * (vals[0] + vals[-1]))
    assert out[0.5] == pytest.approx(expect, rel=1e-12)
    assert 0.0 <= out["boundary"] < 1e-6


def test_free_propagation_round_trip():
    f = PACKET.sample(G)
    np.testing.assert_allclose(free_propagate(free_propagate(f, G, 3.0), G, -3.0), f, atol=1e-13)
