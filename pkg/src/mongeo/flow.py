"""Lagrangian flows of velocity fields, and the gap-filling constructions.

A Lagrangian flow of ``v`` is a family of monotone maps with
``phi(t, x) - phi(s, x) = int_s^t v(r, phi(r, x)) dr``.  Flows need not be
unique when ``v`` is not Lipschitz; :func:`collapse_demo` exhibits this.

Gaps are opened at jump locations with the jump function ``F`` and closed
again with the stairs function ``G``; :func:`fill_jumps` uses them to turn a
path with jumps into a continuous path of the same energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (TOL_MONO, MonotoneMap, PathGrid, SpaceGrid, TimeGrid,
                   VelocityField, interpolate_field)
from .energy import DERIVATIVE_WEIGHT, jump_nodes
from .errors import StepRejected, ValidationError

#: Largest decrease between neighbouring particles tolerated after a flow step.
STEP_TOL = 1e-8

#: Gap size below which the two boundary curves are considered glued.
GAP_COLLAPSE = 1e-12


def _as_callable(v):
    if isinstance(v, VelocityField):
        return lambda t, x: interpolate_field(v, t, x)
    return v


def _clean_slice(y, row):
    inc = np.diff(y)
    if np.any(inc < -STEP_TOL):
        j = int(np.argmin(inc))
        raise StepRejected(
            f"particles {j} and {j + 1} crossed by {-inc[j]:.3e} at time node {row}; refine the time step"
        )
    y = np.clip(np.maximum.accumulate(y), 0.0, 1.0)
    y[0] = 0.0
    y[-1] = 1.0
    return y


def integrate_flow(v, phi0: MonotoneMap, tgrid: TimeGrid | None = None,
                   absorbing=(), capture_tol: float | None = None) -> PathGrid:
    """Advect the nodes of ``phi0`` with ``v`` by classical RK4.

    ``v`` is a :class:`VelocityField` (bilinearly interpolated) or a
    callable ``v(t, x)`` vectorized in ``x``; a callable needs ``tgrid``.
    Each slice is checked for crossings beyond ``STEP_TOL`` and round-off
    reordering is clamped.  Endpoints stay at 0 and 1.

    ``absorbing`` lists rest points of a non-Lipschitz field at which
    particles are captured: a particle that lands within ``capture_tol`` of
    one, or steps across it, is pinned there from then on.  This selects the
    flow that stops on arrival.  Near a cube-root rest point a fixed-step
    integrator stalls or overshoots at distance about ``dt**1.5``, which is
    the default capture tolerance.
    """
    if tgrid is None:
        if not isinstance(v, VelocityField):
            raise ValidationError("a time grid is required for a callable velocity")
        tgrid = v.tgrid
    f = _as_callable(v)
    dt = tgrid.dt
    if capture_tol is None:
        capture_tol = dt**1.5
    out = np.empty((tgrid.m + 1, phi0.grid.n + 1))
    y = phi0.values.copy()
    out[0] = y
    pinned = np.zeros(y.size, dtype=bool)
    for c in absorbing:
        pinned |= y == c
    for k, t in enumerate(tgrid.nodes[:-1]):
        k1 = f(t, y)
        k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = f(t + dt, y + dt * k3)
        y_new = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        y_new[pinned] = y[pinned]
        for c in absorbing:
            hit = ~pinned & ((np.abs(y_new - c) <= capture_tol) | ((y - c) * (y_new - c) < 0))
            y_new[hit] = c
            pinned |= hit
        y = _clean_slice(y_new, k + 1)
        out[k + 1] = y
    return PathGrid(tgrid, phi0.grid, out)


def flow_residual(path: PathGrid, v) -> float:
    """Max one-step defect of the flow equation, midpoint rule in time.

    ``|phi[k+1] - phi[k] - dt * v(t_{k+1/2}, (phi[k] + phi[k+1]) / 2)|`` over
    all nodes and steps.
    """
    f = _as_callable(v)
    dt = path.tgrid.dt
    vals = path.values
    worst = 0.0
    for k, t in enumerate(path.tgrid.nodes[:-1]):
        mid = 0.5 * (vals[k] + vals[k + 1])
        d = vals[k + 1] - vals[k] - dt * np.asarray(f(t + 0.5 * dt, mid))
        worst = max(worst, float(np.max(np.abs(d))))
    return worst


def _smootherstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6 * u - 15) + 10)


def collapse_field(kind: str, taper: float = 0.1):
    """Autonomous cube-root velocity profiles that are not Lipschitz.

    ``to_half``: ``sgn(1/2 - x) |x - 1/2|**(1/3)`` drives interior points to
    1/2 in finite time.  ``from_boundary``: ``-|x - 1|**(1/3)`` lets mass
    leave ``x = 1``.  Both are multiplied by a smooth cutoff equal to 1 away
    from the ends (within ``taper``) so the profile vanishes at 0 and 1.
    Returns a callable ``v(t, x)``.
    """
    if kind == "to_half":
        def v(t, x):
            x = np.asarray(x, dtype=float)
            cut = _smootherstep(x / taper) * _smootherstep((1.0 - x) / taper)
            return np.sign(0.5 - x) * np.abs(x - 0.5) ** (1.0 / 3.0) * cut
    elif kind == "from_boundary":
        def v(t, x):
            x = np.asarray(x, dtype=float)
            return -np.abs(x - 1.0) ** (1.0 / 3.0) * _smootherstep(x / taper)
    else:
        raise ValueError(f"unknown collapse field {kind!r}")
    return v


@dataclass
class CollapseDemo:
    """Two Lagrangian flows of the same non-Lipschitz fields."""

    times: np.ndarray
    to_half_path: PathGrid
    arrival_times: dict
    stationary_half: np.ndarray
    boundary_rest: np.ndarray
    boundary_departing: np.ndarray
    departing_residual: float


def arrival_time(times, trajectory, target: float, tol: float = 1e-6) -> float:
    """First sampled time at which ``trajectory`` is within ``tol`` of ``target``."""
    hit = np.flatnonzero(np.abs(np.asarray(trajectory) - target) <= tol)
    return float(times[hit[0]]) if hit.size else float("inf")


def departing_envelope(t):
    """Exact solution of ``y' = -|y - 1|**(1/3)`` leaving ``y = 1`` at time 0."""
    return 1.0 - (2.0 * np.asarray(t, dtype=float) / 3.0) ** 1.5


def collapse_demo(n: int = 16, m: int = 2000, T: float = 1.0) -> CollapseDemo:
    """Non-uniqueness of Lagrangian flows for cube-root fields.

    Under ``to_half`` every interior node reaches 1/2 after time
    ``(3/2) |x - 1/2|**(2/3)`` and stays, while the node at 1/2 never moves.
    Under ``from_boundary`` the particle at ``x = 1`` may rest forever or
    depart along :func:`departing_envelope`; both solve the same equation.
    """
    tgrid = TimeGrid(m, T)
    grid = SpaceGrid(n)
    field_half = collapse_field("to_half")
    path = integrate_flow(field_half, MonotoneMap(grid, grid.nodes), tgrid, absorbing=(0.5,))
    times = tgrid.nodes
    arrivals = {}
    for j, x in enumerate(grid.nodes):
        if 0.1 <= x <= 0.9 and x != 0.5:
            arrivals[float(x)] = arrival_time(times, path.values[:, j], 0.5)
    stationary = path.values[:, int(round(0.5 * n))] if n % 2 == 0 else np.full(times.size, np.nan)

    field_bdry = collapse_field("from_boundary")
    rest = np.ones_like(times)
    # the departing branch is known in closed form; an integrator started at 1 cannot leave
    depart = departing_envelope(times)
    dt = tgrid.dt
    mid = 0.5 * (depart[1:] + depart[:-1])
    residual = float(np.max(np.abs(np.diff(depart) - dt * field_bdry(0.0, mid))))
    return CollapseDemo(times, path, arrivals, stationary, rest, depart, residual)


# ---------------------------------------------------------------------------
# jump and stairs functions


@dataclass(frozen=True)
class JumpSpec:
    """Gap locations in (0, 1) and their positive widths."""

    locations: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        loc = np.atleast_1d(np.asarray(self.locations, dtype=float))
        wid = np.atleast_1d(np.asarray(self.widths, dtype=float))
        if loc.shape != wid.shape:
            raise ValidationError("locations and widths must have the same length")
        if loc.size and (np.any(loc <= 0) or np.any(loc >= 1)):
            raise ValidationError("jump locations must lie in (0, 1)")
        if np.any(np.diff(loc) <= 0):
            raise ValidationError("jump locations must be strictly increasing")
        if np.any(~(wid > 0)) or not np.isfinite(wid.sum()):
            raise ValidationError("jump widths must be positive and finite")
        for name, arr in (("locations", loc), ("widths", wid)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def total(self) -> float:
        return float(self.widths.sum())

    @property
    def gap_starts(self) -> np.ndarray:
        """Images ``y_i = F(x_i)`` of the jump locations."""
        before = np.concatenate(([0.0], np.cumsum(self.widths)[:-1]))
        return self.locations + before


def jump_function_F(spec: JumpSpec, x):
    """``F(x) = x + sum of widths at locations strictly below x``."""
    x = np.asarray(x, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(spec.widths)))
    out = x + cum[np.searchsorted(spec.locations, x, side="left")]
    return float(out) if out.ndim == 0 else out


def stairs_function_G(spec: JumpSpec, y):
    """``G(y) = inf{x in [0, 1] : F(x) >= y}``, constant on each gap."""
    y = np.asarray(y, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(spec.widths)))
    ends = spec.gap_starts + spec.widths
    k = np.searchsorted(ends, y, side="left")
    cap = np.concatenate((spec.locations, [np.inf]))[k]
    out = np.clip(np.minimum(y - cum[k], cap), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class PushforwardReport:
    max_discrepancy: float
    mass_in: float
    mass_out: float
    gap_mass: float
    pushed: np.ndarray = field(repr=False)
    expected: np.ndarray = field(repr=False)
    gap_bins: np.ndarray = field(repr=False)


def pushforward_check(spec: JumpSpec, density, out_bins: int | None = None,
                      quad: int = 16) -> PushforwardReport:
    """Compare ``F#(f dx)`` with ``f(G(y)) dy`` off the gaps, bin by bin.

    ``density`` holds the cell values of a piecewise-constant ``f`` on a
    uniform grid of [0, 1].  The pushforward is computed exactly by moving
    every sub-cell between jump locations; the reference side integrates
    ``f o G`` over each bin of [0, 1 + eps] outside the gap set with a
    ``quad``-point midpoint rule.
    """
    f = np.asarray(density, dtype=float)
    n = f.size
    h = 1.0 / n
    length = 1.0 + spec.total
    if out_bins is None:
        out_bins = int(np.ceil(length / h - 1e-9))
    edges = np.linspace(0.0, length, out_bins + 1)

    # sub-cells between grid nodes and jump locations, each moved rigidly by F
    cuts = np.union1d(np.linspace(0.0, 1.0, n + 1), spec.locations)
    p, q = cuts[:-1], cuts[1:]
    cell = np.minimum((0.5 * (p + q) / h).astype(int), n - 1)
    cum = np.concatenate(([0.0], np.cumsum(spec.widths)))
    shift = cum[np.searchsorted(spec.locations, p, side="right")]
    lo = p + shift
    dens = f[cell]
    hi = q + shift
    # overlap of every bin with every moved sub-cell; gap bins meet none of them
    overlap = np.minimum(hi[None, :], edges[1:, None]) - np.maximum(lo[None, :], edges[:-1, None])
    pushed = np.clip(overlap, 0.0, None) @ dens

    # same float expressions as the moved sub-cells, so gap edges coincide with them
    starts = spec.locations + cum[:-1]
    ends = spec.locations + cum[1:]
    width = edges[1:] - edges[:-1]
    u = (np.arange(quad) + 0.5) / quad
    ys = edges[:-1, None] + width[:, None] * u[None, :]
    in_gap = np.zeros(ys.shape, dtype=bool)
    for s0, s1 in zip(starts, ends):
        in_gap |= (ys > s0) & (ys < s1)
    xg = stairs_function_G(spec, ys)
    fg = f[np.minimum((xg / h).astype(int), n - 1)]
    expected = np.where(in_gap, 0.0, fg).mean(axis=1) * width

    gap_bins = np.zeros(out_bins, dtype=bool)
    for s0, s1 in zip(starts, ends):
        gap_bins |= (edges[:-1] >= s0) & (edges[1:] <= s1)
    return PushforwardReport(
        max_discrepancy=float(np.max(np.abs(pushed - expected))),
        mass_in=float(np.sum(f) * h),
        mass_out=float(np.sum(pushed)),
        gap_mass=float(np.sum(np.abs(pushed[gap_bins]))),
        pushed=pushed,
        expected=expected,
        gap_bins=gap_bins,
    )


# ---------------------------------------------------------------------------
# filling gaps with the minimal-norm field


def sinh_field(y, lo, hi, v_lo, v_hi, weight: float = DERIVATIVE_WEIGHT):
    """Minimizer of ``int v**2 + weight v'**2`` on ``[lo, hi]`` with end values ``v_lo, v_hi``."""
    c = np.sqrt(weight)
    L = (hi - lo) / c
    if L <= 0:
        return np.full(np.shape(y), 0.5 * (v_lo + v_hi))
    y = np.asarray(y, dtype=float)
    s = np.sinh(L)
    return (v_hi * np.sinh((y - lo) / c) + v_lo * np.sinh((hi - y) / c)) / s


def sinh_field_energy(lo, hi, v_lo, v_hi, weight: float = DERIVATIVE_WEIGHT, samples: int = 2001) -> float:
    """``int_lo^hi v**2 + weight v'**2`` of :func:`sinh_field` by trapezoidal quadrature."""
    if hi <= lo:
        return 0.0
    y = np.linspace(lo, hi, samples)
    c = np.sqrt(weight)
    s = np.sinh((hi - lo) / c)
    v = (v_hi * np.sinh((y - lo) / c) + v_lo * np.sinh((hi - y) / c)) / s
    dv = (v_hi * np.cosh((y - lo) / c) - v_lo * np.cosh((hi - y) / c)) / (c * s)
    return float(np.trapezoid(v * v + weight * dv * dv, y))


@dataclass
class GapFill:
    """Particle trajectories filling a gap; column 0 and the last column are the boundary curves."""

    positions: np.ndarray
    seeds: np.ndarray
    collapsed: np.ndarray
    reference_nodes: list


def _interp_time(arr, k, w):
    return arr[k] if w == 0.0 else (1 - w) * arr[k] + w * arr[k + 1]


def _gap_step(y, k, dt, direction, curves, weight):
    """One RK4 step of interior particles between time nodes ``k`` and ``k + direction``."""
    lo, hi, vlo, vhi = curves

    def rhs(s, yy):
        # s in [0, 1] is the fraction of the way from node k to node k + direction
        kk, w = (k, s) if direction > 0 else (k - 1, 1.0 - s)
        a = _interp_time(lo, kk, w)
        b = _interp_time(hi, kk, w)
        field = sinh_field(yy, a, b, _interp_time(vlo, kk, w), _interp_time(vhi, kk, w), weight)
        return direction * field

    k1 = rhs(0.0, y)
    k2 = rhs(0.5, y + 0.5 * dt * k1)
    k3 = rhs(0.5, y + 0.5 * dt * k2)
    k4 = rhs(1.0, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def fill_between(lo, hi, v_lo, v_hi, tgrid: TimeGrid, seeds=None, n_interior: int = 16,
                 weight: float = DERIVATIVE_WEIGHT) -> GapFill:
    """Fill the region between two time curves with particles of the minimal field.

    The velocity inside the gap is :func:`sinh_field` between
    ``(lo, v_lo)`` and ``(hi, v_hi)``.  On every maximal run of time nodes
    where the gap is open, particles are seeded affinely at a reference node
    (the first node of the run when it starts at t = 0, otherwise the node of
    largest gap) and advected forward and backward from it.  Where the gap is
    shut the particles are pinned to the common value.  Ordering
    ``lo <= particles <= hi`` is enforced exactly after each step.
    """
    lo, hi, v_lo, v_hi = (np.asarray(a, dtype=float) for a in (lo, hi, v_lo, v_hi))
    if lo.size != tgrid.m + 1 or hi.size != lo.size or v_lo.size != lo.size or v_hi.size != lo.size:
        raise ValidationError("boundary curves must be sampled on the time grid")
    if np.any(lo > hi + TOL_MONO):
        raise ValidationError("lower curve exceeds upper curve")
    hi = np.maximum(hi, lo)
    if seeds is None:
        seeds = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    seeds = np.asarray(seeds, dtype=float)
    gap = hi - lo
    open_ = gap >= GAP_COLLAPSE
    pos = np.empty((lo.size, seeds.size))
    pos[~open_] = lo[~open_, None]
    curves = (lo, hi, v_lo, v_hi)
    dt = tgrid.dt
    refs = []

    def clamp(y, k):
        return np.clip(np.maximum.accumulate(y), lo[k], hi[k])

    k = 0
    M = lo.size
    while k < M:
        if not open_[k]:
            k += 1
            continue
        end = k
        while end + 1 < M and open_[end + 1]:
            end += 1
        ref = k if k == 0 else k + int(np.argmax(gap[k:end + 1]))
        refs.append(ref)
        pos[ref] = lo[ref] + seeds * gap[ref]
        y = pos[ref].copy()
        for kk in range(ref, end):
            y = clamp(_gap_step(y, kk, dt, +1, curves, weight), kk + 1)
            pos[kk + 1] = y
        y = pos[ref].copy()
        for kk in range(ref, k, -1):
            y = clamp(_gap_step(y, kk, dt, -1, curves, weight), kk - 1)
            pos[kk - 1] = y
        k = end + 1
    full = np.column_stack([lo, pos, hi])
    return GapFill(full, seeds, ~open_, refs)


@dataclass
class FillResult:
    path: PathGrid
    spec: JumpSpec
    eps: float
    gap_cells: list
    refine: int


def _eval_with_jumps(path: PathGrid, nodes_idx, jumps, x):
    """Evaluate the right-continuous path with jumps at points ``x`` for all times."""
    n = path.sgrid.n
    vals = path.values
    right_end = vals.copy()
    for jr, j in zip(jumps, nodes_idx):
        right_end[:, j] = jr.left_limits
    s = np.clip(np.asarray(x, dtype=float) * n, 0.0, n)
    c = np.minimum(np.floor(s).astype(int), n - 1)
    w = s - c
    return (1.0 - w) * vals[:, c] + w * right_end[:, c + 1]


def fill_jumps(path: PathGrid, jumps, eps: float, refine: int = 1,
               weight: float = DERIVATIVE_WEIGHT) -> FillResult:
    """Replace the jumps of a path by filled gaps and rescale back to [0, 1].

    Each jump gets a width proportional to its largest gap, normalized to a
    total of ``eps`` and rounded down to a whole number of cells of size
    ``h / refine`` (at least one cell).  Outside the gaps the output is the
    input composed with the stairs function; inside, the particles of
    :func:`fill_between`.  The widened interval ``[0, 1 + eps]`` is mapped
    back to [0, 1] linearly, which leaves the action unchanged.
    """
    jumps = sorted(jumps, key=lambda jr: jr.location)
    if eps <= 0:
        raise ValidationError("eps must be positive")
    refine = int(refine)
    n = path.sgrid.n
    H = 1.0 / (n * refine)
    if not jumps:
        fine = SpaceGrid(n * refine)
        vals = _eval_with_jumps(path, [], [], fine.nodes)
        return FillResult(PathGrid(path.tgrid, fine, vals), JumpSpec([], []), 0.0, [], refine)
    idx = jump_nodes(path, jumps)
    gmax = np.array([np.max(jr.gaps) for jr in jumps])
    share = gmax / gmax.sum() if gmax.sum() > 0 else np.full(len(jumps), 1.0 / len(jumps))
    cells = [max(1, int(np.floor(eps * s / H + 1e-9))) for s in share]
    widths = np.array(cells) * H
    spec = JumpSpec([jr.location for jr in jumps], widths)

    fine_nodes = np.arange(n * refine + 1) * H
    fine_nodes[-1] = 1.0
    base = _eval_with_jumps(path, idx, jumps, fine_nodes)
    columns = []
    jump_at = {j * refine: (jr, k) for jr, j, k in zip(jumps, idx, cells)}
    for J in range(n * refine + 1):
        if J in jump_at:
            # left limit, interior particles, right limit
            jr, k = jump_at[J]
            fill = fill_between(jr.left_limits, jr.right_limits, jr.left_velocities,
                                jr.right_velocities, path.tgrid,
                                seeds=np.arange(1, k) / k, weight=weight)
            columns.append(fill.positions)
        else:
            columns.append(base[:, J][:, None])
    values = np.hstack(columns)
    out = PathGrid(path.tgrid, SpaceGrid(values.shape[1] - 1), values)
    return FillResult(out, spec, float(widths.sum()), cells, refine)


def l1_distance(filled: PathGrid, path: PathGrid, jumps=(), samples_per_cell: int = 8) -> float:
    """Time-averaged ``int |filled - path| dx`` with ``path`` read with its jumps."""
    jumps = sorted(jumps, key=lambda jr: jr.location)
    idx = jump_nodes(path, jumps) if jumps else []
    N = max(filled.sgrid.n, path.sgrid.n) * samples_per_cell
    x = (np.arange(N) + 0.5) / N
    a = _eval_with_jumps(path, idx, jumps, x)
    b = np.array([np.interp(x, filled.sgrid.nodes, row) for row in filled.values])
    per_time = np.abs(a - b).mean(axis=1)
    if filled.tgrid.m == 0 or filled.tgrid.T == 0:
        return float(per_time[0])
    return float(np.trapezoid(per_time, dx=filled.tgrid.dt) / filled.tgrid.T)


@dataclass
class HolderReport:
    ok: bool
    worst_ratio: float
    constant: float


def holder_bound_check(path: PathGrid, energy: float) -> HolderReport:
    """Check ``|phi(t_k, x) - phi(t_l, x)| <= 2 sqrt(E) sqrt(|t_k - t_l|)`` on all node pairs."""
    t = path.tgrid.nodes
    vals = path.values
    const = 2.0 * np.sqrt(max(energy, 0.0))
    worst = 0.0
    for k in range(1, t.size):
        diff = np.max(np.abs(vals[k] - vals[:k]), axis=1)
        bound = const * np.sqrt(t[k] - t[:k])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(diff == 0, 0.0, diff / bound)
        worst = max(worst, float(np.max(ratio)))
    return HolderReport(worst <= 1.0, worst, float(const))
