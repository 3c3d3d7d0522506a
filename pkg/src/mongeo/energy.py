"""Energy functionals of the H1 right-invariant metric on Mon+.

The metric weighs velocity fields by ``v**2 + DERIVATIVE_WEIGHT * v_x**2``
with ``DERIVATIVE_WEIGHT = 1/4``.  In Lagrangian coordinates the same action
reads ``(phi_t)**2 phi_x + (1/4) phi_tx**2 / phi_x``; the second integrand is
the Fisher-Rao term.

Discrete stencils
-----------------
For a path sampled at nodes ``(t_k, x_j)`` all Lagrangian quantities live on
space-time cells ``(k + 1/2, j + 1/2)``:

* cell density ``rho[k, c] = (phi[k, c+1] - phi[k, c]) / h`` at each time node,
  and its square root ``s = sqrt(rho)``;
* cell position ``theta[k, c]``, the average of the two nodal values;
* ``phi_t = (theta[k+1] - theta[k]) / dt`` and ``phi_tx = (rho[k+1] - rho[k]) / dt``;
* the density on the space-time cell is ``rho_mid = ((s[k] + s[k+1]) / 2)**2``.

With these choices ``(1/4) phi_tx**2 / rho_mid = ((s[k+1] - s[k]) / dt)**2``, so
the square-root lift reproduces the Lagrangian action to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EnergyBreakdown, PathGrid, TimeGrid, VelocityField
from .errors import DegenerateDensity, DomainError, ValidationError

#: Weight of the derivative term in the H1 norm of velocity fields.
DERIVATIVE_WEIGHT = 0.25


@dataclass(frozen=True)
class FisherRaoOptions:
    """How to treat vanishing densities in the Fisher-Rao integrand.

    ``strict`` follows the convex extension exactly (``+inf`` off the cone);
    ``floored`` replaces the density ``a`` by ``max(a, floor)`` and is meant
    for line searches only.
    """

    floor: float = 0.0
    mode: str = "strict"

    def __post_init__(self):
        if self.mode not in ("strict", "floored"):
            raise ValidationError(f"unknown Fisher-Rao mode {self.mode!r}")
        if not self.floor >= 0:
            raise ValidationError("Fisher-Rao floor must be nonnegative")
        if self.mode == "strict" and self.floor != 0:
            raise ValidationError("strict mode requires a zero floor")

    @classmethod
    def floored(cls, floor: float = 1e-10) -> "FisherRaoOptions":
        return cls(floor=floor, mode="floored")


STRICT = FisherRaoOptions()


def fr_integrand(a, b, opts: FisherRaoOptions = STRICT):
    """One-homogeneous Fisher-Rao integrand ``b**2 / (4 a)``.

    Returns 0 at ``(0, 0)`` and ``inf`` when ``a <= 0`` and ``b != 0``.
    Works elementwise on arrays.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if opts.mode == "floored":
        a = np.maximum(a, opts.floor)
    pos = a > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(pos, 0.25 * b * b / np.where(pos, a, 1.0), np.where(b == 0, 0.0, np.inf))
    return float(val) if val.ndim == 0 else val


def eulerian_energy(v: VelocityField) -> float:
    """Action ``int int v**2 + (1/4) v_x**2 dx dt`` by trapezoidal quadrature.

    ``v_x`` uses centered differences with second-order one-sided ends.
    """
    if v.tgrid.T == 0.0:
        return 0.0
    h = v.sgrid.h
    vals = v.values
    vx = np.gradient(vals, h, axis=1, edge_order=2) if v.sgrid.n >= 2 else np.diff(vals, axis=1) / h
    density = vals**2 + DERIVATIVE_WEIGHT * vx**2
    per_time = np.trapezoid(density, dx=h, axis=1)
    return float(np.trapezoid(per_time, dx=v.tgrid.dt))


def _cell_terms(left, right, h, dt):
    """Space-time cell quantities shared by every Lagrangian stencil.

    ``left`` / ``right`` hold the values at the two ends of each cell for
    every time node, shape ``(m + 1, ncells)``.
    """
    rho = (right - left) / h
    if np.any(rho < 0):
        k, c = np.argwhere(rho < 0)[0]
        raise ValidationError(f"negative cell density at time node {k}, cell {c}")
    s = np.sqrt(rho)
    theta = 0.5 * (left + right)
    s_mid = 0.5 * (s[1:] + s[:-1])
    phi_t = np.diff(theta, axis=0) / dt
    phi_tx = np.diff(rho, axis=0) / dt
    return s_mid * s_mid, phi_t, phi_tx


def _action_parts(left, right, h, dt, opts: FisherRaoOptions):
    rho_mid, phi_t, phi_tx = _cell_terms(left, right, h, dt)
    fr = fr_integrand(rho_mid, phi_tx, opts)
    if np.any(np.isinf(fr)):
        k, c = np.argwhere(np.isinf(fr))[0]
        raise DegenerateDensity(
            f"vanishing density with nonzero phi_tx on time interval {k}, cell {c}"
        )
    kinetic = h * dt * np.sum(phi_t * phi_t * rho_mid)
    fisher = h * dt * np.sum(fr)
    return float(kinetic), float(fisher)


def lagrangian_energy(path: PathGrid, opts: FisherRaoOptions = STRICT) -> EnergyBreakdown:
    """Discrete Lagrangian action of a path (kinetic and Fisher-Rao parts)."""
    if path.tgrid.T == 0.0:
        return EnergyBreakdown(0.0, 0.0, 0.0)
    vals = path.values
    kin, fr = _action_parts(vals[:, :-1], vals[:, 1:], path.sgrid.h, path.tgrid.dt, opts)
    return EnergyBreakdown(kin, fr, 0.0)


def sqrt_lift(path: PathGrid) -> np.ndarray:
    """Cell-centred lift ``z = sqrt(phi_x) exp(i phi)`` at every time node.

    Returns a complex array of shape ``(m + 1, n)``; ``|z|**2`` is the cell
    density and ``arg z`` the cell-averaged position.
    """
    vals = path.values
    rho = np.diff(vals, axis=1) / path.sgrid.h
    theta = 0.5 * (vals[:, :-1] + vals[:, 1:])
    return np.sqrt(rho) * np.exp(1j * theta)


def sqrt_lift_energy(path: PathGrid) -> float:
    """Kinetic energy ``int int |z_t|**2`` of the square-root lift.

    The time derivative is taken in polar form on each space-time cell,
    ``|z_t|**2 = (d|z|/dt)**2 + |z|_mid**2 (d arg z/dt)**2``, with the
    modulus averaged over the two time nodes.  These are the stencils of
    :func:`lagrangian_energy`.
    """
    if path.tgrid.T == 0.0:
        return 0.0
    z = sqrt_lift(path)
    dt = path.tgrid.dt
    mod = np.abs(z)
    arg = np.angle(z)
    # a vanishing modulus makes arg meaningless; take the position from the nodes instead
    theta = 0.5 * (path.values[:, :-1] + path.values[:, 1:])
    arg = np.where(mod > 0, arg, theta)
    mod_mid = 0.5 * (mod[1:] + mod[:-1])
    dmod = np.diff(mod, axis=0) / dt
    darg = np.diff(arg, axis=0) / dt
    return float(path.sgrid.h * dt * np.sum(dmod * dmod + mod_mid * mod_mid * darg * darg))


def e_sh_closed(v_minus, v_plus, a, b, weight: float = 1.0):
    """Minimal value of ``int_a^b v**2 + weight * v'**2`` with ``v(a), v(b)`` prescribed.

    With ``c = sqrt(weight)`` and ``L = (b - a) / c`` the minimizer is the
    sinh interpolant and the value is
    ``c * ((v-**2 + v+**2) coth L - 2 v- v+ / sinh L)``.  It is evaluated as
    ``c * ((v+ - v-)**2 / sinh L + (v-**2 + v+**2) tanh(L / 2))``, which is the
    same number without cancellation and stays finite for large ``L``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(b <= a):
        raise DomainError("e_sh_closed needs b > a")
    if weight <= 0:
        raise DomainError("derivative weight must be positive")
    u = np.asarray(v_minus, dtype=float)
    w = np.asarray(v_plus, dtype=float)
    c = np.sqrt(weight)
    L = (b - a) / c
    with np.errstate(over="ignore"):
        csch = np.where(L < 700, 1.0 / np.sinh(np.minimum(L, 700)), 0.0)
    val = c * ((w - u) ** 2 * csch + (u * u + w * w) * np.tanh(0.5 * L))
    return float(val) if val.ndim == 0 else val


def e_sh_as_printed(v_minus, v_plus, gap):
    """Literal jump integrand with the leading gap factors on both terms.

    ``L ((v-)**2 + (v+)**2) coth L - 2 L v+ v- / sinh L``; at ``L = 0`` the
    continuous extension ``(v+ - v-)**2`` is used.
    """
    u = np.asarray(v_minus, dtype=float)
    w = np.asarray(v_plus, dtype=float)
    L = np.asarray(gap, dtype=float)
    small = L < 1e-8
    Ls = np.where(small, 1.0, L)
    l_coth = np.where(small, 1.0, Ls / np.tanh(Ls))
    l_csch = np.where(small, 1.0, Ls / np.sinh(np.minimum(Ls, 700)))
    val = (u * u + w * w) * l_coth - 2.0 * u * w * l_csch
    return float(val) if val.ndim == 0 else val


def jump_energy(jumps, tgrid: TimeGrid, formula: str = "closed_form",
                weight: float = 1.0, gap_tol: float = 1e-14) -> float:
    """Time integral of the energy carried by the gaps of a relaxed path.

    ``closed_form`` sums :func:`e_sh_closed` over open gaps (closed gaps
    contribute nothing); ``as_printed`` evaluates :func:`e_sh_as_printed`.
    ``weight`` is the derivative weight: 1 prices gaps with the plain
    ``int v**2 + v'**2``, :data:`DERIVATIVE_WEIGHT` with the norm of the
    metric (what :func:`relaxed_energy` uses).
    """
    if formula not in ("closed_form", "as_printed"):
        raise ValueError(f"unknown jump formula {formula!r}")
    per_time = np.zeros(tgrid.m + 1)
    for jr in jumps:
        if jr.left_limits.size != tgrid.m + 1:
            raise ValidationError("jump record does not match the time grid")
        gap = jr.gaps
        if formula == "closed_form":
            open_ = gap > gap_tol
            if np.any(open_):
                vals = e_sh_closed(jr.left_velocities[open_], jr.right_velocities[open_],
                                   jr.left_limits[open_], jr.right_limits[open_], weight)
                per_time[open_] += vals
        else:
            per_time += e_sh_as_printed(jr.left_velocities, jr.right_velocities, gap)
    if tgrid.T == 0.0:
        return 0.0
    return float(np.trapezoid(per_time, dx=tgrid.dt))


def jump_nodes(path: PathGrid, jumps) -> list[int]:
    """Grid node index of each jump location; locations must sit on nodes."""
    n = path.sgrid.n
    idx = []
    for jr in jumps:
        j = int(round(jr.location * n))
        if abs(j / n - jr.location) > 1e-12 or not 0 < j < n:
            raise ValidationError(f"jump location {jr.location} is not an interior grid node")
        idx.append(j)
    if len(set(idx)) != len(idx):
        raise ValidationError("two jumps share a grid node")
    return idx


def split_at_jumps(path: PathGrid, jumps):
    """Cell end values with jumps removed from the cells they bound.

    ``path`` holds the right-continuous values (``phi(x_i) = phi+``); the
    cell ending at a jump node takes the left limit as its right end.
    Returns ``(left, right)`` arrays of shape ``(m + 1, n)``.
    """
    vals = path.values
    left = vals[:, :-1].copy()
    right = vals[:, 1:].copy()
    for jr, j in zip(jumps, jump_nodes(path, jumps)):
        if jr.left_limits.size != path.tgrid.m + 1:
            raise ValidationError("jump record does not match the time grid")
        if np.any(np.abs(jr.right_limits - vals[:, j]) > 1e-9):
            raise ValidationError(f"path value at jump node {j} must equal the right limit")
        if np.any(jr.left_limits < vals[:, j - 1] - 1e-12):
            raise ValidationError(f"left limit at jump node {j} lies below the previous node")
        right[:, j - 1] = np.maximum(jr.left_limits, left[:, j - 1])
    return left, right


def relaxed_energy(path: PathGrid, jumps=(), opts: FisherRaoOptions = STRICT,
                   formula: str = "closed_form", weight: float = DERIVATIVE_WEIGHT) -> EnergyBreakdown:
    """Action of a path with jumps: continuous-part action plus gap energy.

    ``path`` samples the full (right-continuous) map; each jump location is
    a grid node and its record supplies the left limit there.  Kinetic and
    Fisher-Rao terms are computed on the cells with the jumps removed, so
    they see the continuous part of the density and the full velocity.
    """
    jumps = list(jumps)
    if not jumps:
        return lagrangian_energy(path, opts)
    if path.tgrid.T == 0.0:
        return EnergyBreakdown(0.0, 0.0, 0.0)
    left, right = split_at_jumps(path, jumps)
    kin, fr = _action_parts(left, right, path.sgrid.h, path.tgrid.dt, opts)
    jmp = jump_energy(jumps, path.tgrid, formula=formula, weight=weight)
    return EnergyBreakdown(kin, fr, jmp)
