import math

import numpy as np
import pytest

from wavescatter.errors import DomainError
from wavescatter.freq_oracle import born_fourier, born_on_grid
from wavescatter.grids import Grid3
from wavescatter.potential_lab import gaussian
from wavescatter.propagator import first_order_limit
from wavescatter.testfuncs import AnnulusFunction, GaussianPacket, SampledFunction
from wavescatter.verify.suites import subgrid


def test_packet_norm_and_transform():
    p = GaussianPacket(1.3, (0.4, 0.0, -0.2), (0.1, 0.2, 0.0), 0.5 + 0.5j)
    g = Grid3(10.0, 64)
    vals = p.sample(g)
    assert g.norm(vals) == pytest.approx(p.l2_norm(), rel=1e-10)
    eta = np.array([[0.3, -0.1, 0.2], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(SampledFunction(g, vals).fourier(eta), p.fourier(eta), rtol=1e-9)


def test_annulus_function_transform_and_norm():
    a = AnnulusFunction(1.0, 1.2)
    assert a.fourier(np.array([[0.5, 0, 0], [1.1, 0, 0], [1.5, 0, 0]]))[[0, 2]].tolist() == [0, 0]
    # Plancherel: the spatial radial integral of |f|^2 reproduces the Fourier-side norm
    r = np.linspace(0.0, 400.0, 200001)
    spatial = np.trapezoid(4 * math.pi * r ** 2 * a.radial_profile(r) ** 2, r)
    assert math.sqrt(spatial) == pytest.approx(a.l2_norm(), rel=1e-3)


def test_sampled_function_only_lives_on_its_grid():
    g = Grid3(1.0, 4)
    s = SampledFunction(g, np.zeros(g.shape))
    with pytest.raises(DomainError):
        s.sample(Grid3(2.0, 4))
    with pytest.raises(DomainError):
        s(np.zeros(3))
    with pytest.raises(DomainError):
        SampledFunction(g, np.zeros((2, 2, 2)))


def test_born_transform_scales_linearly_and_vanishes_for_zero_potential():
    f = GaussianPacket(1.0, (0.5, 0.0, 0.0), (0.0, 0.0, 0.0))
    z = np.array([[0.4, 0.1, 0.0], [0.0, 0.9, 0.3]])
    a = born_fourier(gaussian(0.2, 1.0), f, z)
    b = born_fourier(gaussian(0.4, 1.0), f, z)
    np.testing.assert_allclose(b, 2 * a, rtol=1e-10)
    assert not np.any(born_fourier(gaussian(0.0, 1.0), f, z))


def test_frequency_oracle_against_time_limit():
    # independent routes to W1+ f: frequency-side quadrature and coupling extraction in time
    V = gaussian(1.0, 1.0)
    f = GaussianPacket(1.5, (2.0, 0.0, 0.0), (0.3, -0.2, 0.1))
    box, og = Grid3(24.0, 96), Grid3(8.0, 32)
    wo = born_on_grid(V, f, og)
    wt = subgrid(first_order_limit(f.sample(box), V, box, T=4.0, dt=1 / 16), box, og)
    assert np.linalg.norm(wt - wo) / np.linalg.norm(wo) < 3e-2
