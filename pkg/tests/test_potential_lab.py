import math

import numpy as np
import pytest

from wavescatter.errors import ConfigError, DivergenceError, DomainError, ResolutionError
from wavescatter.grids import Grid3, write_grid_file
from wavescatter.potential_lab import (b_norm, fourier_on_ray, gaussian, l1_norm, l2_norm, load_potential,
                                       moment_l2_norm, potential_from_mapping, radial_fourier_quadrature,
                                       sampled, shell_norms, square_well, sum_of, weighted_l2_norm, yukawa, zero)

PI32 = math.pi ** 1.5


def test_gaussian_transform_at_zero():
    V = gaussian(1.0, 1.0)
    assert V.fourier_at_zero() == pytest.approx(5.568327996831708, rel=1e-14)
    s = np.array([0.0, 1.0, 3.0])
    np.testing.assert_allclose(fourier_on_ray(V, [0, 0, 1.0], s).real, PI32 * np.exp(-s ** 2 / 4), rtol=1e-13)


def test_zero_potential_transform_vanishes():
    assert not np.any(fourier_on_ray(zero(), [1.0, 0, 0], np.linspace(-3, 3, 7)))


@pytest.mark.parametrize("V", [square_well(2.0, 1.0), yukawa(1.0, 1.0, 0.2), gaussian(0.7, 1.3)])
def test_closed_forms_match_sine_transform_quadrature(V):
    s = np.array([0.0, 0.5, 3.0])
    np.testing.assert_allclose(V.radial_fourier(s), radial_fourier_quadrature(V, s), rtol=1e-9, atol=1e-12)


def test_frozen_norms_of_unit_gaussian():
    V = gaussian(1.0, 1.0)
    assert l1_norm(V) == pytest.approx(PI32, rel=1e-12)
    assert l2_norm(V) == pytest.approx((math.pi / 2) ** 0.75, rel=1e-12)
    assert moment_l2_norm(V) == pytest.approx(1.2151238341878892, rel=1e-10)
    assert b_norm(V) == pytest.approx(1.9082588178542859, rel=1e-10)
    assert weighted_l2_norm(V, 1.5) == pytest.approx(2.1803566291776693, rel=1e-10)


def test_frozen_b_norms_of_well_and_yukawa():
    assert b_norm(square_well(1.0, 1.0)) == pytest.approx(1.804978652771623, rel=1e-10)
    assert b_norm(yukawa(1.0, 1.0, 0.1)) == pytest.approx(3.504173348536753, rel=1e-10)


def test_shells_cover_the_extended_range():
    sh = shell_norms(gaussian(1.0, 1.0))
    assert len(sh.contributions) == sh.k_max - sh.k_min + 1
    assert sh.contributions[-1] <= 1e-10 * sh.total


def test_off_center_transform_carries_a_phase():
    c = (0.5, -0.2, 0.1)
    V = gaussian(1.0, 1.0, c)
    xi = np.array([[0.3, 0.1, -0.4]])
    expect = gaussian(1.0, 1.0).fourier(xi) * np.exp(-1j * xi @ np.array(c))
    np.testing.assert_allclose(V.fourier(xi), expect, rtol=1e-14)


def test_sampled_transform_matches_analytic_and_rejects_beyond_nyquist():
    g = Grid3(6.0, 48)
    V = sampled(g, gaussian(1.0, 1.0)(g.points()).reshape(g.shape))
    xi = np.array([[0.0, 0.0, 0.0], [1.0, 0.5, 0.0]])
    np.testing.assert_allclose(V.fourier(xi), gaussian(1.0, 1.0).fourier(xi), rtol=2e-2)
    with pytest.raises(ResolutionError):
        V.fourier(np.array([[g.nyquist * 1.5, 0, 0]]))


def test_unknown_kind_and_bad_dilation_raise():
    from wavescatter.potential_lab import Potential
    with pytest.raises(DomainError):
        Potential("cubic")
    with pytest.raises(DomainError):
        gaussian(1.0, 1.0).dilated(0.0)


def test_slowly_decaying_transform_is_reported():
    from wavescatter.ray_transform import RayQuadConfig, compute_l1
    # Yukawa V^ falls only like 1/s^2, which is still above 1e-3 of the peak at s = 20
    with pytest.raises(DivergenceError):
        compute_l1(yukawa(1.0, 1.0, 1e-5), t_grid=np.array([0.0, 1.0]), quad=RayQuadConfig(s_cap=20.0))


def test_sum_potentials_stay_flat_and_add():
    V = sum_of(gaussian(1.0, 1.0), sum_of(square_well(1.0, 1.0), gaussian(0.5, 2.0)))
    assert len(V.terms) == 3
    x = np.array([[0.2, 0.1, 0.0]])
    parts = gaussian(1.0, 1.0)(x) + square_well(1.0, 1.0)(x) + gaussian(0.5, 2.0)(x)
    np.testing.assert_allclose(V(x), parts)


def test_mapping_and_grid_file_loading(tmp_path):
    g = Grid3(2.0, 8)
    vals = gaussian(1.0, 1.0)(g.points()).reshape(g.shape)
    write_grid_file(tmp_path / "v.bin", vals, 2.0)
    (tmp_path / "v.pot").write_text("kind = sampled\nfile = v.bin\n")
    V = load_potential(tmp_path / "v.pot")
    np.testing.assert_array_equal(V.values, vals)
    W = potential_from_mapping({"kind": "sum", "term.0.kind": "gaussian", "term.0.amplitude": "1",
                                "term.0.width": "1", "term.1.kind": "square_well", "term.1.depth": "2",
                                "term.1.radius": "0.5"})
    assert W.kind == "sum" and len(W.terms) == 2
    with pytest.raises(ConfigError):
        potential_from_mapping({"kind": "square_well", "depth": "1", "radius": "2", "support_radius": "1"})
    with pytest.raises(ConfigError):
        potential_from_mapping({"kind": "gaussian", "amplitude": "1"})
