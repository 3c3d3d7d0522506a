import numpy as np
import pytest

from mongeo.core import MonotoneMap, SpaceGrid, identity_map, map_from_function
from mongeo.errors import ValidationError
from mongeo.hellinger import (hellinger_distance_sq, hellinger_path, hellinger_velocity,
                              root_density_rate_sq)
from oracles import hellinger_sq_analytic_square


def random_map(rng, n):
    inc = rng.random(n) ** 2
    inc[rng.random(n) < 0.1] = 0.0
    inc += 1e-15
    return MonotoneMap(SpaceGrid(n), np.concatenate(([0.0], np.cumsum(inc) / inc.sum())))


def test_distance_zero_for_equal_maps():
    phi = map_from_function(lambda x: x**3, SpaceGrid(32))
    assert hellinger_distance_sq(phi, phi) == 0.0


def test_distance_square_map():
    g = SpaceGrid(256)
    d2 = hellinger_distance_sq(identity_map(g), map_from_function(lambda x: x * x, g))
    assert d2 == pytest.approx(hellinger_sq_analytic_square(), rel=5e-3)


def test_distance_symmetric_and_bounded():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = random_map(rng, 40), random_map(rng, 40)
        assert hellinger_distance_sq(a, b) == hellinger_distance_sq(b, a)
        assert hellinger_distance_sq(a, b) <= 2 + 1e-12


def test_distance_extreme_pair_reaches_two():
    g = SpaceGrid(4)
    a = MonotoneMap(g, [0, 0.5, 1, 1, 1])
    b = MonotoneMap(g, [0, 0, 0, 0.5, 1])
    assert hellinger_distance_sq(a, b) == pytest.approx(2.0)


def test_grid_mismatch():
    with pytest.raises(ValidationError):
        hellinger_distance_sq(identity_map(SpaceGrid(4)), identity_map(SpaceGrid(5)))


def test_same_maps_give_constant_path():
    phi = map_from_function(lambda x: x**2, SpaceGrid(16))
    rep = hellinger_path(phi, phi, 8)
    assert rep.energy.total == 0.0
    assert np.array_equal(rep.path.values, np.tile(phi.values, (9, 1)))


def test_square_example():
    g = SpaceGrid(256)
    a, b = identity_map(g), map_from_function(lambda x: x * x, g)
    rep = hellinger_path(a, b, 64)
    assert rep.bound == pytest.approx(144 * 0.114382, rel=5e-3)
    assert rep.energy.total <= rep.bound
    assert rep.within_bound


def test_endpoints_and_boundary_exact():
    rng = np.random.default_rng(2)
    a, b = random_map(rng, 30), random_map(rng, 30)
    p = hellinger_path(a, b, 10).path
    assert np.array_equal(p.values[0], a.values) and np.array_equal(p.values[-1], b.values)
    assert np.all(p.values[:, 0] == 0) and np.all(np.abs(p.values[:, -1] - 1) <= 1e-12)


def test_normalization_is_exact_on_grid():
    # without the forced last node the cumulative sum already ends at 1
    from mongeo.hellinger import _slices
    rng = np.random.default_rng(9)
    a, b = random_map(rng, 50), random_map(rng, 50)
    h = a.grid.h
    s0, s1 = np.sqrt(a.densities), np.sqrt(b.densities)
    d2 = hellinger_distance_sq(a, b)
    for t in (0.1, 0.5, 0.77):
        f = t * s1 + (1 - t) * s0
        assert np.sum(h * f * f) / (1 - t * (1 - t) * d2) == pytest.approx(1.0, abs=1e-12)
    assert _slices(a, b, np.array([0.3]))[0, -1] == 1.0


def test_velocity_and_root_rate_bounds():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b = random_map(rng, 64), random_map(rng, 64)
        d2 = hellinger_distance_sq(a, b)
        d = np.sqrt(d2)
        for t in np.linspace(0, 1, 9):
            assert np.max(np.abs(hellinger_velocity(a, b, t))) <= 4 * d + 6 * d2 + 1e-12
            assert root_density_rate_sq(a, b, t) <= 4 * d2 + 2 * d2 * d2 + 1e-12


def test_velocity_matches_finite_difference():
    g = SpaceGrid(32)
    a, b = identity_map(g), map_from_function(lambda x: x**2, g)
    from mongeo.hellinger import _slices
    e = 1e-6
    fd = (_slices(a, b, np.array([0.4 + e])) - _slices(a, b, np.array([0.4 - e])))[0] / (2 * e)
    assert np.allclose(hellinger_velocity(a, b, 0.4), fd, atol=1e-8)
