import math

import numpy as np
import pytest

from wavescatter.errors import ConfigError, DomainError
from wavescatter.grids import (Grid3, default_t_grid, gauss_legendre, panel_gauss_legendre, read_grid_file,
                               sphere_rule, trapezoid_weights, write_grid_file)
from wavescatter.keyvalue import get_float, get_floats, get_list, parse_key_values, subsection


def test_grid_geometry():
    g = Grid3(4.0, 16)
    assert g.h == 0.5
    assert g.weights().sum() == pytest.approx((2 * 4.0) ** 3)
    assert 0.0 in g.axis()
    with pytest.raises(DomainError):
        Grid3(4.0, 15)
    with pytest.raises(DomainError):
        Grid3(-1.0, 16)


def test_sphere_rule_integrates_polynomials():
    nodes, w = sphere_rule(17)
    assert w.sum() == pytest.approx(4 * math.pi, rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(nodes, axis=1), 1.0, atol=1e-14)
    assert w @ nodes[:, 0] ** 2 == pytest.approx(4 * math.pi / 3, rel=1e-12)
    assert w @ (nodes[:, 0] ** 4 * nodes[:, 1] ** 2) == pytest.approx(4 * math.pi / 35, rel=1e-12)
    with pytest.raises(DomainError):
        sphere_rule(10_000)


def test_one_dimensional_rules():
    x, w = gauss_legendre(0.0, 2.0, 6)
    assert w @ x ** 5 == pytest.approx(2 ** 6 / 6)
    x, w = panel_gauss_legendre(np.array([0.0, 1.0, 3.0]), 4)
    assert w @ np.exp(x) == pytest.approx(math.e ** 3 - 1, rel=1e-6)
    assert trapezoid_weights(np.array([0.0, 1.0, 3.0])) == pytest.approx([0.5, 1.5, 1.0])
    t, wt = default_t_grid()
    assert len(t) == 128 and t[0] == 0.0 and t[-1] == pytest.approx(400.0)
    assert wt.sum() == pytest.approx(400.0)


@pytest.mark.parametrize("dtype", [float, complex])
def test_grid_file_round_trip(tmp_path, dtype):
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((2, 3, 4)).astype(dtype)
    if dtype is complex:
        vals = vals + 1j * rng.standard_normal(vals.shape)
    write_grid_file(tmp_path / "g.bin", vals, (1.0, 2.0, 3.0))
    back, ext = read_grid_file(tmp_path / "g.bin")
    np.testing.assert_array_equal(back, vals)
    np.testing.assert_array_equal(ext, [1.0, 2.0, 3.0])


def test_grid_file_rejects_bad_sizes(tmp_path):
    write_grid_file(tmp_path / "g.bin", np.zeros((2, 2, 2)), 1.0)
    data = (tmp_path / "g.bin").read_bytes()
    (tmp_path / "bad.bin").write_bytes(data[:-8])
    with pytest.raises(DomainError):
        read_grid_file(tmp_path / "bad.bin")


def test_key_value_parsing():
    m = parse_key_values("a = 1  # comment\n\nb.c = 2 3, 4\nd = x y\n")
    assert get_float(m, "a") == 1.0
    assert get_floats(m, "b.c") == (2.0, 3.0, 4.0)
    assert get_list(m, "d") == ("x", "y")
    assert subsection(m, "b") == {"c": "2 3, 4"}
    for bad in ("novalue", "= 3", "a = 1\na = 2"):
        with pytest.raises(ConfigError):
            parse_key_values(bad)
    with pytest.raises(ConfigError):
        get_float({"a": "x"}, "a")
    with pytest.raises(ConfigError):
        get_float({}, "a")
