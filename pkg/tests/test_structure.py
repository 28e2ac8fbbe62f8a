import math

import numpy as np
import pytest

from wavescatter.errors import BandLimitError, DomainError
from wavescatter.freq_oracle import born_on_grid
from wavescatter.greens import support_points
from wavescatter.grids import Grid3
from wavescatter.kernel_algebra import EtaGrid, invert_family, scattering_family, t1_family
from wavescatter.potential_lab import gaussian, sum_of, zero
from wavescatter.ray_transform import compute_l1, l1_mass, l1_tilde_mass
from wavescatter.structure import (STRUCTURE_CONSTANT, StructureDecomposition, apply_scattering, apply_structure,
                                   apply_wave, apply_wave_many, asymptotic_split, band_loss_on, decompose_s1,
                                   decompose_w1, structure_t_grid)
from wavescatter.testfuncs import GaussianPacket

V = gaussian(0.2, 1.0)
PACKET = GaussianPacket(1.0, (0.5, 0.0, 0.0), (0.0, 0.0, 0.0))


@pytest.fixture(scope="module")
def profile():
    return compute_l1(V, t_grid=structure_t_grid(12.0, 0.2))


@pytest.fixture(scope="module")
def decomposition(profile):
    return decompose_w1(profile, 11)


@pytest.fixture(scope="module")
def kernel_setup():
    ps = support_points(V, Grid3(2.0, 8), 1e-4)
    eg = EtaGrid.gauss(4.5, 16, 11)
    return ps, eg, Grid3(4.0, 16)


def test_mass_matches_ray_masses(profile, decomposition):
    expect = abs(STRUCTURE_CONSTANT) * (l1_mass(profile) + l1_tilde_mass(profile))
    assert decomposition.mass == pytest.approx(expect, rel=1e-12)
    assert decomposition.mass == pytest.approx(0.3397053292662174, rel=1e-8)


def test_coefficient_at_the_origin(decomposition):
    i = int(np.argmin(decomposition.t))
    assert decomposition.coeff_minus[i] == pytest.approx(STRUCTURE_CONSTANT * 0.2 * 2 * math.pi ** 1.5, rel=1e-4)


def test_zero_profile_has_zero_mass():
    D = decompose_w1(compute_l1(zero(), t_grid=structure_t_grid(4.0)))
    assert D.mass == 0.0


def test_mean_free_potential_has_no_leading_part():
    W = sum_of(gaussian(1.0, 1.0), gaussian(-0.125, 2.0))
    assert abs(W.fourier_at_zero()) < 1e-12
    D = decompose_w1(compute_l1(W, t_grid=structure_t_grid(8.0)), 5)
    split = asymptotic_split(D, W)
    assert split.leading.mass < 1e-12
    assert math.isfinite(split.remainder_weighted_mass)


def test_scattering_atoms_have_equal_half_space_coefficients(profile):
    S = decompose_s1(profile, 5)
    np.testing.assert_allclose(S.coeff_minus, S.coeff_plus, atol=1e-9 * np.abs(S.coeff_minus).max())


def test_structure_route_matches_frequency_oracle(decomposition, kernel_setup):
    _, _, og = kernel_setup
    fg = Grid3(6.0, 48)
    ws = apply_structure(decomposition, PACKET.sample(fg), fg, og.points()).reshape(og.shape)
    wo = born_on_grid(V, PACKET, og)
    assert np.linalg.norm(ws - wo) / np.linalg.norm(wo) <= 2e-2


def test_linearity_in_f_and_in_the_decomposition(decomposition):
    fg = Grid3(6.0, 48)
    f = PACKET.sample(fg)
    g = GaussianPacket(1.3, (0.0, 0.4, 0.0), (0.2, 0.0, -0.3)).sample(fg)
    pts = Grid3(2.0, 6).points()
    a, b = 0.7 - 0.1j, -1.2
    lhs = apply_structure(decomposition, a * f + b * g, fg, pts)
    rhs = a * apply_structure(decomposition, f, fg, pts) + b * apply_structure(decomposition, g, fg, pts)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * np.abs(rhs).max())
    D2 = decomposition.with_coefficients(3 * decomposition.coeff_minus, 3 * decomposition.coeff_plus)
    np.testing.assert_allclose(apply_structure(D2, f, fg, pts), 3 * apply_structure(decomposition, f, fg, pts),
                               rtol=1e-12)


def test_quarter_turn_covariance(decomposition):
    fg = Grid3(6.0, 48)
    f = GaussianPacket(1.0, (0.5, 0.0, 0.0), (0.3, 0.0, 0.0))
    fr = GaussianPacket(1.0, (0.0, 0.5, 0.0), (0.0, 0.3, 0.0))
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    pts = Grid3(2.0, 4).points()
    a = apply_structure(decomposition, f.sample(fg), fg, pts)
    b = apply_structure(decomposition, fr.sample(fg), fg, pts @ R.T)
    np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(a).max())


@pytest.mark.parametrize("p", [1, 2, np.inf])
def test_minkowski_bound(profile, p):
    D = decompose_w1(profile, 5)
    fg = Grid3(6.0, 24)
    f = PACKET.sample(fg)
    w = apply_structure(D, f, fg, fg.points()).reshape(fg.shape)
    assert fg.norm(w, p) <= D.mass * fg.norm(f, p)


def test_kernel_route_against_oracle_and_streaming(kernel_setup):
    ps, eg, og = kernel_setup
    assert band_loss_on(eg, PACKET) < 1e-6
    Tp = invert_family(t1_family(V, eg, +1, ps))
    w = apply_wave(Tp, PACKET, og)
    many = apply_wave_many(V, eg, ps, [PACKET, PACKET.moved(k0=(0.0, 0.3, 0.0))], og)
    np.testing.assert_allclose(many[0], w, atol=1e-12 * np.abs(w).max())
    w1 = w - PACKET.sample(og)
    wo = born_on_grid(V, PACKET, og)
    # W - I carries higher Born orders of size |V|, so compare loosely
    assert np.linalg.norm(w1 - wo) / np.linalg.norm(wo) <= 5e-2


def test_zero_potential_kernel_routes_are_identities(kernel_setup):
    ps, eg, og = kernel_setup
    ps0 = type(ps)(ps.points, ps.weights, ps.h, np.zeros(len(ps)))
    f = PACKET.sample(og)
    Tp = invert_family(t1_family(zero(), eg, +1, ps0))
    np.testing.assert_allclose(apply_wave(Tp, PACKET, og), f, atol=1e-14)
    S = scattering_family(zero(), eg, ps0)
    np.testing.assert_allclose(apply_scattering(S, PACKET, og), f, atol=1e-14)


def test_band_limit_and_lattice_checks(kernel_setup):
    ps, eg, og = kernel_setup
    fast = GaussianPacket(1.0, (6.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    with pytest.raises(BandLimitError):
        apply_wave_many(V, eg, ps, [fast], og)
    with pytest.raises(DomainError):
        apply_wave_many(V, eg, ps, [PACKET], Grid3(4.2, 16))


def test_decomposition_csv(tmp_path, decomposition):
    decomposition.write(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert len(lines) == len(decomposition) + 1
    assert lines[0].startswith("omega_x,omega_y,omega_z,t,")
    with pytest.raises(DomainError):
        StructureDecomposition(np.zeros((2, 3)), np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))
