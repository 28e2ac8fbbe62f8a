import math

import numpy as np
import pytest

from wavescatter.errors import DomainError
from wavescatter.potential_lab import gaussian, square_well, sum_of, yukawa, zero
from wavescatter.ray_transform import (RayQuadConfig, compute_l1, full_line_parseval, l1_mass, l1_tilde_mass,
                                       leading_remainder_mass, leading_term, plancherel_check)

PI32 = math.pi ** 1.5
T = np.array([0.0, 1.0, 10.0, 50.0, 100.0, 200.0])


@pytest.fixture(scope="module")
def unit_profile():
    return compute_l1(gaussian(1.0, 1.0), t_grid=T)


def test_origin_value(unit_profile):
    assert unit_profile.L1[0, 0].real == pytest.approx(2 * PI32, rel=1e-4)
    assert abs(unit_profile.L1[0, 0].imag) < 1e-10


def test_frozen_samples(unit_profile):
    # brute-force ray quadrature values for V = exp(-|x|^2)
    expect = [11.1363645, 6.40986711 - 7.68619662j, -0.237664454, -8.93079318e-03, -2.22866894e-03,
              -5.56916345e-04]
    np.testing.assert_allclose(unit_profile.L1[0], expect, rtol=1e-7, atol=1e-8)


def test_tail_approaches_leading_term(unit_profile):
    assert T[-1] ** 2 * unit_profile.L1[0, -1].real == pytest.approx(-4 * PI32, rel=1e-2)
    assert leading_term(gaussian(1.0, 1.0), 0.0) == pytest.approx(-4 * PI32)
    assert leading_term(gaussian(1.0, 1.0), 1.0, tilde=True) == pytest.approx(2 * PI32)


def test_tilde_is_minus_conjugate_for_real_potentials(unit_profile):
    np.testing.assert_allclose(unit_profile.L1_tilde, -unit_profile.L1.conj(), atol=1e-9)


def test_zero_potential_gives_zero_profile():
    p = compute_l1(zero(), t_grid=T)
    assert not np.any(p.L1) and not np.any(p.L1_tilde)
    assert l1_mass(p) == 0.0
    rep = plancherel_check(p, zero())
    assert rep.lhs == rep.rhs == rep.ratio == 0.0


def test_linearity():
    V1, V2 = gaussian(1.0, 1.0), square_well(0.5, 1.2)
    a, b = 0.7, -1.3
    p = compute_l1(sum_of(V1.scaled(a), V2.scaled(b)), t_grid=T)
    q = a * compute_l1(V1, t_grid=T).L1 + b * compute_l1(V2, t_grid=T).L1
    np.testing.assert_allclose(p.L1, q, atol=1e-5 * np.abs(q).max())


def test_off_center_potential_uses_a_sphere_rule():
    V = gaussian(1.0, 1.0, (0.3, 0.0, 0.0))
    p = compute_l1(V, t_grid=T[:3])
    assert len(p.omegas) > 1
    # V^(-s w) = conj V^(s w), so the sphere average at t = 0 pairs w with -w and is real
    mean0 = (p.omega_weights @ p.L1[:, 0]) / (4 * math.pi)
    assert abs(mean0.imag) < 1e-8


def test_full_line_parseval_oracle():
    for V in (gaussian(1.0, 1.0), square_well(1.0, 1.0), yukawa(1.0, 1.0, 0.2)):
        assert full_line_parseval(V, [0, 0, 1.0]).relative_error <= 1e-6


def test_extrapolation_increments_shrink():
    p = compute_l1(gaussian(1.0, 1.0), t_grid=T)
    inc = p.increments
    assert all(b < a for a, b in zip(inc, inc[1:]))


def test_remainder_mass_finite_and_masses_agree():
    V = gaussian(1.0, 1.0)
    p = compute_l1(V)
    assert math.isfinite(leading_remainder_mass(p, V))
    assert l1_mass(p) == pytest.approx(l1_tilde_mass(p), rel=1e-12)


def test_bad_inputs():
    with pytest.raises(DomainError):
        compute_l1(gaussian(1.0, 1.0), t_grid=np.array([-1.0, 0.0]))
    with pytest.raises(DomainError):
        RayQuadConfig(eps_sequence=(0.1, 0.2))
    with pytest.raises(DomainError):
        compute_l1(gaussian(1.0, 1.0), t_grid=T, quad=RayQuadConfig(eps_sequence=(0.3, 0.1, 0.05)))


def test_profile_serialization(tmp_path, unit_profile):
    unit_profile.write(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "omega_x,omega_y,omega_z,t,re_L1,im_L1,re_L1t,im_L1t"
    assert len(lines) == 1 + len(T)
    assert (tmp_path / "p.csv.json").exists()
