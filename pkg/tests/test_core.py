import numpy as np
import pytest

from mongeo.core import (EnergyBreakdown, JumpRecord, MonotoneMap, PathGrid, SpaceGrid, TimeGrid,
                         VelocityField, compose, eval_map, generalized_inverse, identity_map,
                         interpolate_field, map_from_function, validate_monotone)
from mongeo.errors import (BoundaryViolation, DomainError, MonotonicityViolation,
                           ValidationError)


def test_space_grid_nodes_are_exact():
    g = SpaceGrid(7)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert g.h == pytest.approx(1 / 7)
    assert np.allclose(np.diff(g.nodes), g.h)


def test_time_grid_ends():
    tg = TimeGrid(3, 0.3)
    assert tg.nodes[0] == 0.0 and tg.nodes[-1] == 0.3
    with pytest.raises(ValidationError):
        TimeGrid(0)
    with pytest.raises(ValidationError):
        TimeGrid(4, -1.0)


def test_identity_accepted():
    g = SpaceGrid(10)
    phi = validate_monotone(g.nodes)
    assert np.array_equal(phi.values, g.nodes)


def test_decreasing_increment_rejected():
    with pytest.raises(MonotonicityViolation) as info:
        validate_monotone([0, 0.5, 0.4, 1])
    assert info.value.column == 2


def test_flat_segments_allowed():
    phi = validate_monotone([0, 0.25, 0.25, 1])
    assert phi.values[1] == phi.values[2]


def test_boundary_violation():
    with pytest.raises(BoundaryViolation):
        validate_monotone([0.1, 0.5, 1])
    with pytest.raises(BoundaryViolation):
        validate_monotone([0, 0.5, 0.9])


def test_roundoff_increment_clamped():
    phi = validate_monotone([0, 0.5, 0.5 - 5e-13, 1])
    assert np.all(np.diff(phi.values) >= 0)


def test_values_are_read_only():
    phi = identity_map(SpaceGrid(4))
    with pytest.raises(ValueError):
        phi.values[1] = 0.3


def test_eval_identity():
    assert eval_map(identity_map(SpaceGrid(10)), 0.37) == pytest.approx(0.37)


def test_eval_square_interpolation_error():
    g = SpaceGrid(100)
    phi = map_from_function(lambda x: x * x, g)
    assert abs(eval_map(phi, 0.5) - 0.25) <= g.h**2
    assert abs(eval_map(phi, 0.503) - 0.503**2) <= g.h**2


def test_eval_endpoint_and_domain():
    phi = map_from_function(lambda x: x**3, SpaceGrid(9))
    assert eval_map(phi, 1.0) == 1.0
    with pytest.raises(DomainError):
        eval_map(phi, 1.5)
    with pytest.raises(DomainError):
        eval_map(phi, -0.01)


def test_inverse_of_identity():
    g = SpaceGrid(16)
    psi = generalized_inverse(identity_map(g))
    assert np.allclose(psi.values, g.nodes, atol=1e-15)


def test_inverse_of_square_is_root():
    g = SpaceGrid(200)
    psi = generalized_inverse(map_from_function(lambda x: x * x, g))
    assert np.max(np.abs(psi.values - np.sqrt(g.nodes))) <= 2 * g.h


def test_inverse_of_step_map():
    # zero on [0, 0.5), one on (0.5, 1]: the inf of {x : phi(x) >= y} is 0.5 for 0 < y < 1
    g = SpaceGrid(100)
    vals = np.where(g.nodes <= 0.5, 0.0, 1.0)
    psi = generalized_inverse(MonotoneMap(g, vals))
    assert np.allclose(psi.values[1:-1], 0.5, atol=g.h)


def test_inverse_reproduces_values():
    g = SpaceGrid(64)
    phi = map_from_function(lambda x: (x + x**2) / 2, g)
    psi = generalized_inverse(phi)
    assert np.allclose(eval_map(phi, psi.values), g.nodes, atol=1e-3)


def test_compose_with_identity():
    g = SpaceGrid(32)
    phi = map_from_function(lambda x: x**2, g)
    assert np.allclose(compose(phi, identity_map(g)).values, phi.values)


def test_path_rows_checked_with_row_number():
    tg, g = TimeGrid(2), SpaceGrid(3)
    vals = np.tile(g.nodes, (3, 1))
    vals[1, 2] = 0.2
    with pytest.raises(MonotonicityViolation) as info:
        PathGrid(tg, g, vals)
    assert info.value.row == 1


def test_path_shape_checked():
    with pytest.raises(ValidationError):
        PathGrid(TimeGrid(2), SpaceGrid(3), np.zeros((2, 4)))


def test_velocity_boundary():
    tg, g = TimeGrid(2), SpaceGrid(4)
    with pytest.raises(BoundaryViolation):
        VelocityField(tg, g, np.ones((3, 5)))
    v = VelocityField.from_function(lambda t, x: np.sin(np.pi * x), tg, g)
    assert np.all(v.values[:, [0, -1]] == 0)


def test_interpolate_field_bilinear():
    tg, g = TimeGrid(4), SpaceGrid(8)
    v = VelocityField.from_function(lambda t, x: t * x * (1 - x), tg, g)
    # bilinear interpolation is exact in t for fields linear in t
    assert interpolate_field(v, 0.3, 0.5) == pytest.approx(0.3 * 0.25)


def test_jump_record_invariants():
    tg = TimeGrid(4)
    with pytest.raises(MonotonicityViolation):
        JumpRecord(0.5, [0.5] * 5, [0.4] * 5, [0] * 5, [0] * 5)
    with pytest.raises(DomainError):
        JumpRecord(1.0, [0.4] * 5, [0.5] * 5, [0] * 5, [0] * 5)
    lo = 0.3 + 0.1 * tg.nodes
    jr = JumpRecord.from_limits(0.5, lo, lo + 0.2, tg)
    assert np.allclose(jr.left_velocities, 0.1)
    assert jr.velocity_mismatch(tg) < 1e-12
    assert np.allclose(jr.gaps, 0.2)


def test_energy_breakdown_total():
    e = EnergyBreakdown(0.1, 0.2, 0.3)
    assert e.total == 0.1 + 0.2 + 0.3
    assert e.to_dict()["total"] == e.total
