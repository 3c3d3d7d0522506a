"""Camassa-Holm evolution, pressure, and the short-time minimality certificate.

The geodesic equation of the metric is evolved in momentum form

    m = v - (1/4) v_xx,    m_t + v m_x + 2 m v_x = 0,

with ``v(0) = v(1) = 0``.  Velocities are recovered from momenta by a
tridiagonal Helmholtz solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .core import SpaceGrid, TimeGrid, VelocityField
from .energy import DERIVATIVE_WEIGHT
from .errors import BlowupDetected, ValidationError

#: Guard on ``max|v_x| * dt``; beyond it the explicit scheme no longer resolves the flow.
BLOWUP_LIMIT = 0.5


@dataclass(frozen=True)
class MomentumField:
    """Momentum ``m = v - (1/4) v_xx`` sampled at the nodes of a grid."""

    grid: SpaceGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n + 1,):
            raise ValidationError(f"momentum needs {self.grid.n + 1} nodal values, got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_velocity(cls, grid: SpaceGrid, v) -> "MomentumField":
        return cls(grid, momentum_of(v, grid.h))


def _second_diff(v, h):
    """Second derivative at every node; second-order one-sided at the ends."""
    v = np.asarray(v, dtype=float)
    d2 = np.empty_like(v)
    d2[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    if v.size >= 4:
        d2[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / (h * h)
        d2[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / (h * h)
    else:
        d2[0], d2[-1] = d2[1], d2[-2]
    return d2


def _first_diff(v, h):
    return np.gradient(np.asarray(v, dtype=float), h, edge_order=2)


def momentum_of(v, h):
    return np.asarray(v, dtype=float) - DERIVATIVE_WEIGHT * _second_diff(v, h)


def _helmholtz_bands(n, h):
    k = DERIVATIVE_WEIGHT / (h * h)
    ab = np.empty((2, n - 1))
    ab[0, :] = -k
    ab[1, :] = 1.0 + 2.0 * k
    return ab


def helmholtz_solve(m: MomentumField) -> np.ndarray:
    """Velocity ``v`` with ``v - (1/4) D2 v = m`` at interior nodes and ``v = 0`` at the ends.

    ``D2`` is the three-point Laplacian; the matrix is symmetric positive
    definite and solved as a banded Cholesky system.
    """
    n, h = m.grid.n, m.grid.h
    v = np.zeros(n + 1)
    if n >= 2:
        v[1:-1] = solveh_banded(_helmholtz_bands(n, h), m.values[1:-1])
    return v


def helmholtz_residual(v, m: MomentumField) -> float:
    """Normwise backward error ``|A v - m| / (|A| |v| + |m|)`` in the max-norm.

    The absolute residual cannot drop below about ``eps |A| |v|`` because
    ``|A|`` grows like ``1/h**2``; the scaled form is what a direct solve
    keeps at rounding level.
    """
    n, h = m.grid.n, m.grid.h
    v = np.asarray(v, dtype=float)
    if n < 2:
        return 0.0
    k = DERIVATIVE_WEIGHT / (h * h)
    lap = (v[2:] - 2 * v[1:-1] + v[:-2]) / (h * h)
    res = np.max(np.abs(v[1:-1] - DERIVATIVE_WEIGHT * lap - m.values[1:-1]))
    scale = (1.0 + 4.0 * k) * np.max(np.abs(v)) + np.max(np.abs(m.values[1:-1]))
    return float(res / scale) if scale > 0 else float(res)


def energy_density(v, h) -> float:
    """``int v**2 + (1/4) v_x**2 dx`` by the trapezoidal rule."""
    v = np.asarray(v, dtype=float)
    vx = _first_diff(v, h)
    return float(np.trapezoid(v * v + DERIVATIVE_WEIGHT * vx * vx, dx=h))


def energy_trace(v: VelocityField) -> np.ndarray:
    """Energy of every time slice of a velocity field."""
    return np.array([energy_density(row, v.sgrid.h) for row in v.values])


def _rhs(mom, grid, h):
    mm = MomentumField.__new__(MomentumField)
    object.__setattr__(mm, "grid", grid)
    object.__setattr__(mm, "values", mom)
    v = helmholtz_solve(mm)
    vx = _first_diff(v, h)
    mx = _first_diff(mom, h)
    return -(v * mx + 2.0 * mom * vx), v, vx


def ch_evolve(v0, T: float, m: int, grid: SpaceGrid | None = None) -> VelocityField:
    """Evolve ``v0`` for time ``T`` in ``m`` RK4 steps.

    ``v0`` is an array of nodal values vanishing at both ends.  Raises
    :class:`BlowupDetected` when ``max|v_x| * dt`` exceeds 0.5; the
    exception carries the field and energy trace up to the last accepted
    step.
    """
    v0 = np.asarray(v0, dtype=float)
    grid = grid or SpaceGrid(v0.size - 1)
    if v0.shape != (grid.n + 1,):
        raise ValidationError("initial velocity does not match the grid")
    if abs(v0[0]) > 1e-12 or abs(v0[-1]) > 1e-12:
        raise ValidationError("initial velocity must vanish at both ends")
    if not np.all(np.isfinite(v0)):
        raise ValidationError("initial velocity has non-finite values")
    tgrid = TimeGrid(m, T)
    h, dt = grid.h, tgrid.dt
    v0 = v0.copy()
    v0[0] = v0[-1] = 0.0
    mom = momentum_of(v0, h)
    out = np.zeros((m + 1, grid.n + 1))
    out[0] = v0
    energies = [energy_density(v0, h)]
    for k in range(m):
        k1, v, vx = _rhs(mom, grid, h)
        if np.max(np.abs(vx)) * dt > BLOWUP_LIMIT:
            raise _blowup(out, energies, k, grid, tgrid, np.max(np.abs(vx)))
        k2, _, _ = _rhs(mom + 0.5 * dt * k1, grid, h)
        k3, _, _ = _rhs(mom + 0.5 * dt * k2, grid, h)
        k4, _, _ = _rhs(mom + dt * k3, grid, h)
        mom = mom + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        _, v, vx = _rhs(mom, grid, h)
        if not np.all(np.isfinite(v)) or np.max(np.abs(vx)) * dt > BLOWUP_LIMIT:
            raise _blowup(out, energies, k, grid, tgrid, np.max(np.abs(vx)))
        out[k + 1] = v
        energies.append(energy_density(v, h))
    return VelocityField(tgrid, grid, out)


def _blowup(out, energies, k, grid, tgrid, slope):
    """Exception holding the accepted steps ``0..k``."""
    partial = VelocityField(TimeGrid(max(k, 1), tgrid.dt * max(k, 1)), grid,
                            out[:k + 1] if k >= 1 else np.vstack([out[0], out[0]]))
    return BlowupDetected(
        f"max|v_x| * dt = {slope * tgrid.dt:.3f} exceeds {BLOWUP_LIMIT} at step {k}",
        partial=partial, energies=np.array(energies[:k + 1]), step=k)


# ---------------------------------------------------------------------------
# pressure and certificate


@dataclass
class Pressure:
    p: np.ndarray = field(repr=False)
    residual: float
    residual_field: np.ndarray = field(repr=False)


def compute_pressure(v: VelocityField, include_ends: bool = False) -> Pressure:
    """Pressure ``p = -(1/2)[(1/2) v_tx + (1/4) v_x**2 + (1/2) v v_xx - v**2]``.

    Time derivatives are centred, one-sided (first order) at the two end
    slices.  The momentum equation ``v_t + 2 v v_x + p_x = 0`` is returned
    as a residual, max-norm over interior time slices unless
    ``include_ends``.
    """
    vals = v.values
    h, dt = v.sgrid.h, v.tgrid.dt
    vx = np.gradient(vals, h, axis=1, edge_order=2)
    vxx = np.array([_second_diff(row, h) for row in vals])
    if v.tgrid.m >= 2:
        vt = np.gradient(vals, dt, axis=0, edge_order=1)
        vtx = np.gradient(vx, dt, axis=0, edge_order=1)
    else:
        vt = np.repeat(np.diff(vals, axis=0) / dt, 2, axis=0)
        vtx = np.repeat(np.diff(vx, axis=0) / dt, 2, axis=0)
    p = -0.5 * (0.5 * vtx + 0.25 * vx * vx + 0.5 * vals * vxx - vals * vals)
    px = np.gradient(p, h, axis=1, edge_order=2)
    res = vt + 2.0 * vals * vx + px
    core = res if include_ends or res.shape[0] <= 2 else res[1:-1]
    return Pressure(p, float(np.max(np.abs(core))), res)


@dataclass
class Certificate:
    T: float
    sup_opnorm: float
    margin: float
    verdict: str

    def to_dict(self) -> dict:
        return {"T": self.T, "sup_opnorm": self.sup_opnorm, "margin": self.margin,
                "verdict": self.verdict}


def opnorm_field(p, h):
    """Operator norm of ``[[p_xx, 2 p_x], [2 p_x, 2 p]]`` at every node."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    px = np.gradient(p, h, axis=1, edge_order=2) if p.shape[1] >= 3 else np.zeros_like(p)
    pxx = np.array([_second_diff(row, h) for row in p]) if p.shape[1] >= 4 else np.zeros_like(p)
    a, b, d = pxx, 2.0 * px, 2.0 * p
    return np.abs(0.5 * (a + d)) + np.sqrt((0.5 * (a - d)) ** 2 + b * b)


def verdict_for(margin: float) -> str:
    if margin > 0:
        return "strict_minimizer"
    if margin == 0:
        return "minimizer"
    return "inconclusive"


def certificate_from_pressure(p, h: float, T: float, include_ends: bool = False) -> Certificate:
    """Certificate ``pi**2 - T**2 sup|M|`` for a pressure sampled on a space-time grid."""
    if not T > 0:
        raise ValidationError("horizon must be positive")
    norms = opnorm_field(p, h)
    if not include_ends and norms.shape[0] > 2:
        norms = norms[1:-1]
    sup = float(np.max(norms))
    margin = np.pi**2 - T * T * sup
    return Certificate(float(T), sup, float(margin), verdict_for(margin))


def minimality_certificate(v: VelocityField, T: float | None = None,
                           include_ends: bool = False) -> Certificate:
    """Short-time minimality certificate of a computed solution on ``[0, T]``."""
    T = v.tgrid.T if T is None else T
    pr = compute_pressure(v, include_ends)
    return certificate_from_pressure(pr.p, v.sgrid.h, T, include_ends)


def critical_horizon(sup_opnorm: float) -> float:
    """Largest horizon certified by a given ``sup|M|`` (``pi / sqrt(sup)``)."""
    return float("inf") if sup_opnorm == 0 else float(np.pi / np.sqrt(sup_opnorm))


# ---------------------------------------------------------------------------
# peakon-antipeakon collision


def _smootherstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * u * (u * (6 * u - 15) + 10)


def peakon_pair(grid: SpaceGrid, amplitude: float = 1.0, width: float = 0.1,
                centers=(0.4, 0.6), smoothing: float = 0.01, taper: float = 0.1) -> np.ndarray:
    """Smoothed peakon-antipeakon profile vanishing at both ends.

    ``a (exp(-|x - c1| / w) - exp(-|x - c2| / w))`` is convolved with a
    Gaussian of standard deviation ``smoothing`` and multiplied by a smooth
    cutoff equal to 1 away from the ends.
    """
    x = grid.nodes
    c1, c2 = centers
    raw = amplitude * (np.exp(-np.abs(x - c1) / width) - np.exp(-np.abs(x - c2) / width))
    if smoothing > 0:
        half = int(np.ceil(4 * smoothing / grid.h))
        offs = np.arange(-half, half + 1) * grid.h
        ker = np.exp(-0.5 * (offs / smoothing) ** 2)
        ker /= ker.sum()
        xs = np.concatenate((x[0] + offs[offs < 0], x, x[-1] + offs[offs > 0]))
        ext = amplitude * (np.exp(-np.abs(xs - c1) / width) - np.exp(-np.abs(xs - c2) / width))
        raw = np.convolve(ext, ker, mode="valid")
    cut = _smootherstep(x / taper) * _smootherstep((1.0 - x) / taper)
    out = raw * cut
    out[0] = out[-1] = 0.0
    return out


@dataclass
class PeakonRun:
    times: np.ndarray
    min_density: np.ndarray
    energies: np.ndarray
    blowup_step: int | None
    velocity: VelocityField = field(repr=False)


def peakon_demo(n: int = 512, T: float = 1.0, m: int = 4000, amplitude: float = 1.0,
                width: float = 0.1, smoothing: float = 0.01) -> PeakonRun:
    """Evolve a peakon-antipeakon pair and follow the smallest density of its flow.

    The run stops at the blowup guard or at ``T``.  Min density is
    ``min_j (phi_{j+1} - phi_j) / h`` of the flow of the computed field,
    started from the identity.
    """
    from .core import MonotoneMap
    from .flow import integrate_flow

    grid = SpaceGrid(n)
    v0 = peakon_pair(grid, amplitude, width, smoothing=smoothing)
    blow = None
    try:
        vel = ch_evolve(v0, T, m, grid)
        energies = energy_trace(vel)
    except BlowupDetected as exc:
        vel = exc.partial
        energies = exc.energies
        blow = exc.step
    path = integrate_flow(vel, MonotoneMap(grid, grid.nodes))
    mins = np.min(np.diff(path.values, axis=1), axis=1) / grid.h
    return PeakonRun(vel.tgrid.nodes, mins, np.asarray(energies), blow, vel)
