"""Grids, monotone maps, paths and velocity fields on the unit interval.

Every object here is immutable once built: array fields are copied and
flagged read-only.  Maps are sampled at the nodes ``x_j = j/n`` of a uniform
grid and interpolated piecewise linearly, which keeps interpolants monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryViolation, DomainError, MonotonicityViolation, ValidationError

#: Tolerance for boundary equality and for clamping negative round-off increments.
TOL_MONO = 1e-12


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform grid of ``n`` cells on [0, 1]."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"number of cells must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n + 1) / self.n
        x[-1] = 1.0
        return x

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) / self.n


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``m`` steps on [0, T]."""

    m: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"number of time steps must be a positive integer, got {self.m!r}")
        if not np.isfinite(self.T) or self.T < 0:
            raise ValidationError(f"horizon must be a nonnegative real, got {self.T!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / self.m

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.m + 1) * (self.T / self.m)
        t[-1] = self.T
        return t


def _check_slice(values, row=None):
    """Validate one row of nodal values, returning a cleaned copy."""
    where = "" if row is None else f" in row {row}"
    v = np.array(values, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValidationError(f"map needs at least two nodal values{where}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"non-finite nodal value{where}")
    if abs(v[0]) > TOL_MONO:
        raise BoundaryViolation(f"map must send 0 to 0{where}, got {v[0]!r}")
    if abs(v[-1] - 1.0) > TOL_MONO:
        raise BoundaryViolation(f"map must send 1 to 1{where}, got {v[-1]!r}")
    inc = np.diff(v)
    bad = np.flatnonzero(inc < -TOL_MONO)
    if bad.size:
        j = int(bad[0])
        raise MonotonicityViolation(
            f"decreasing increment {inc[j]:.3e}{where} between columns {j} and {j + 1}",
            row=row,
            column=j + 1,
        )
    v[0] = 0.0
    v[-1] = 1.0
    v = np.clip(np.maximum.accumulate(v), 0.0, 1.0)
    return v


@dataclass(frozen=True)
class MonotoneMap:
    """Nondecreasing map of [0, 1] fixing both endpoints, sampled on a grid."""

    grid: SpaceGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _check_slice(self.values)
        if v.size != self.grid.n + 1:
            raise ValidationError(f"expected {self.grid.n + 1} nodal values, got {v.size}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def densities(self) -> np.ndarray:
        """Cell densities, i.e. the discrete derivative on each cell."""
        return np.diff(self.values) / self.grid.h

    def __call__(self, x):
        return eval_map(self, x)


@dataclass(frozen=True)
class PathGrid:
    """Space-time samples ``values[k, j] = phi(t_k, x_j)`` of a path of monotone maps."""

    tgrid: TimeGrid
    sgrid: SpaceGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        raw = np.array(self.values, dtype=float)
        shape = (self.tgrid.m + 1, self.sgrid.n + 1)
        if raw.shape != shape:
            raise ValidationError(f"path array has shape {raw.shape}, expected {shape}")
        clean = np.empty_like(raw)
        for k in range(shape[0]):
            clean[k] = _check_slice(raw[k], row=k)
        object.__setattr__(self, "values", _frozen(clean))

    def slice(self, k: int) -> MonotoneMap:
        return MonotoneMap(self.sgrid, self.values[k])

    @property
    def start(self) -> MonotoneMap:
        return self.slice(0)

    @property
    def end(self) -> MonotoneMap:
        return self.slice(self.tgrid.m)

    def reversed(self) -> "PathGrid":
        return PathGrid(self.tgrid, self.sgrid, self.values[::-1])

    @classmethod
    def constant(cls, phi: MonotoneMap, tgrid: TimeGrid) -> "PathGrid":
        return cls(tgrid, phi.grid, np.tile(phi.values, (tgrid.m + 1, 1)))


@dataclass(frozen=True)
class VelocityField:
    """Space-time samples of an Eulerian velocity vanishing at x = 0 and x = 1."""

    tgrid: TimeGrid
    sgrid: SpaceGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        shape = (self.tgrid.m + 1, self.sgrid.n + 1)
        if v.shape != shape:
            raise ValidationError(f"velocity array has shape {v.shape}, expected {shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("velocity field has non-finite entries")
        if np.any(v[:, 0] != 0.0) or np.any(v[:, -1] != 0.0):
            raise BoundaryViolation("velocity must vanish at x = 0 and x = 1")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, fn, tgrid: TimeGrid, sgrid: SpaceGrid) -> "VelocityField":
        """Sample ``fn(t, x)`` on the grids, forcing the Dirichlet boundary."""
        t = tgrid.nodes[:, None]
        x = sgrid.nodes[None, :]
        v = np.broadcast_to(np.asarray(fn(t, x), dtype=float), (t.size, x.size)).copy()
        v[:, 0] = 0.0
        v[:, -1] = 0.0
        return cls(tgrid, sgrid, v)

    def __call__(self, t, x):
        return interpolate_field(self, t, x)


@dataclass(frozen=True)
class JumpRecord:
    """Left and right limits of a path at a fixed discontinuity location.

    Limits and velocities are arrays over the time nodes.  Velocities are
    stored independently of the limits; :meth:`velocity_mismatch` measures
    how far they are from finite differences of the limits.
    """

    location: float
    left_limits: np.ndarray = field(repr=False)
    right_limits: np.ndarray = field(repr=False)
    left_velocities: np.ndarray = field(repr=False)
    right_velocities: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 0.0 < self.location < 1.0:
            raise DomainError(f"jump location must lie in (0, 1), got {self.location!r}")
        arrays = [np.array(getattr(self, name), dtype=float).ravel() for name in
                  ("left_limits", "right_limits", "left_velocities", "right_velocities")]
        if len({a.size for a in arrays}) != 1:
            raise ValidationError("jump record arrays must share the time dimension")
        lo, hi = arrays[0], arrays[1]
        if np.any(lo > hi + TOL_MONO):
            k = int(np.flatnonzero(lo > hi + TOL_MONO)[0])
            raise MonotonicityViolation(f"left limit exceeds right limit at time node {k}", row=k)
        arrays[1] = np.maximum(hi, lo)
        object.__setattr__(self, "location", float(self.location))
        for name, a in zip(("left_limits", "right_limits", "left_velocities", "right_velocities"), arrays):
            object.__setattr__(self, name, _frozen(a))

    @classmethod
    def from_limits(cls, location, left_limits, right_limits, tgrid: TimeGrid) -> "JumpRecord":
        """Build a record whose velocities are differences of the limits."""
        lo = np.asarray(left_limits, dtype=float)
        hi = np.asarray(right_limits, dtype=float)
        return cls(location, lo, hi, np.gradient(lo, tgrid.dt, edge_order=2),
                   np.gradient(hi, tgrid.dt, edge_order=2))

    @property
    def gaps(self) -> np.ndarray:
        return self.right_limits - self.left_limits

    def velocity_mismatch(self, tgrid: TimeGrid) -> float:
        """Max deviation between stored velocities and centered differences of the limits."""
        if tgrid.m < 2:
            return 0.0
        dl = np.gradient(self.left_limits, tgrid.dt, edge_order=2)
        dr = np.gradient(self.right_limits, tgrid.dt, edge_order=2)
        return float(max(np.max(np.abs(dl - self.left_velocities)),
                         np.max(np.abs(dr - self.right_velocities))))


@dataclass(frozen=True)
class EnergyBreakdown:
    """Kinetic, Fisher-Rao and jump parts of an action, with their sum."""

    kinetic: float
    fisher_rao: float
    jump: float = 0.0
    total: float = field(init=False)

    def __post_init__(self):
        for name in ("kinetic", "fisher_rao", "jump"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "total", self.kinetic + self.fisher_rao + self.jump)

    def to_dict(self) -> dict:
        return {"kinetic": self.kinetic, "fisher_rao": self.fisher_rao,
                "jump": self.jump, "total": self.total}


def validate_monotone(values, grid: SpaceGrid | None = None) -> MonotoneMap:
    """Check nodal values against the Mon+ invariants and wrap them.

    Increments in ``[-1e-12, 0)`` are treated as round-off and clamped.
    """
    v = np.asarray(values, dtype=float)
    if grid is None:
        grid = SpaceGrid(v.size - 1)
    return MonotoneMap(grid, v)


def identity_map(grid: SpaceGrid) -> MonotoneMap:
    return MonotoneMap(grid, grid.nodes)


def map_from_function(fn, grid: SpaceGrid) -> MonotoneMap:
    """Sample a nondecreasing function with ``fn(0) = 0, fn(1) = 1``."""
    return validate_monotone(fn(grid.nodes), grid)


def eval_map(phi: MonotoneMap, x):
    """Piecewise-linear interpolation of ``phi`` at points of [0, 1]."""
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0.0) or np.any(xa > 1.0):
        raise DomainError("evaluation points must lie in [0, 1]")
    out = np.interp(xa, phi.grid.nodes, phi.values)
    return float(out) if out.ndim == 0 else out


def generalized_inverse(phi: MonotoneMap, out_grid: SpaceGrid | None = None) -> MonotoneMap:
    """Left-continuous inverse ``psi(y) = inf{x : phi(x) >= y}`` sampled on ``out_grid``.

    The endpoint values are pinned to 0 and 1 so the result lies in Mon+;
    inside (0, 1) the infimum convention is exact for the interpolant.
    """
    if out_grid is None:
        out_grid = phi.grid
    y = out_grid.nodes
    xs = phi.grid.nodes
    vals = phi.values
    # first node with value >= y; the inf lies in the cell just before it
    j = np.searchsorted(vals, y, side="left")
    jj = np.clip(j, 1, vals.size - 1)
    lo = vals[jj - 1]
    span = vals[jj] - lo
    frac = np.clip((y - lo) / np.where(span > 0, span, 1.0), 0.0, 1.0)
    psi = np.where(j == 0, 0.0, xs[jj - 1] + frac * (xs[jj] - xs[jj - 1]))
    psi[0] = 0.0
    psi[-1] = 1.0
    return MonotoneMap(out_grid, np.maximum.accumulate(psi))


def compose(phi: MonotoneMap, eta: MonotoneMap) -> MonotoneMap:
    """Right composition ``phi o eta`` on the grid of ``eta``."""
    return MonotoneMap(eta.grid, eval_map(phi, eta.values))


def interpolate_field(v: VelocityField, t, x):
    """Bilinear interpolation of a sampled velocity field at ``(t, x)``.

    ``t`` is a scalar; ``x`` may be an array.  Times outside the grid are
    clamped to the nearest node.
    """
    tg = v.tgrid
    if tg.T == 0.0:
        row = v.values[0]
    else:
        s = np.clip(t / tg.dt, 0.0, tg.m)
        k = min(int(np.floor(s)), tg.m - 1)
        w = s - k
        row = (1.0 - w) * v.values[k] + w * v.values[k + 1]
    return np.interp(x, v.sgrid.nodes, row)
