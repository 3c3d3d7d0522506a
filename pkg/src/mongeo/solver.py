"""Minimal-action paths between monotone maps by direct transcription.

The unknowns are the interior nodal values ``phi[k, j]``, ``0 < k < m`` and
``0 < j < n``; the end slices and the boundary columns are fixed.  The
objective is the discrete Lagrangian action of :mod:`mongeo.energy`,
written per space-time cell as

    h dt [ (dtheta/dt)**2 ((s_k + s_{k+1}) / 2)**2 + ((s_{k+1} - s_k) / dt)**2 ]

with ``s = sqrt(rho)``.  Its gradient is assembled exactly from this form.
Feasibility (cell increments at least ``delta h``) is kept by a projection
after every step, and steps come from limited-memory BFGS with Armijo
backtracking.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dstn, idstn

from .core import EnergyBreakdown, MonotoneMap, PathGrid, SpaceGrid, TimeGrid, compose
from .energy import lagrangian_energy
from .errors import DegenerateDensity, ValidationError
from .hellinger import hellinger_path


def worker_count() -> int:
    """Thread cap from ``MONGEO_THREADS``, defaulting to the CPU count."""
    raw = os.environ.get("MONGEO_THREADS", "").strip()
    if raw:
        try:
            val = int(raw)
        except ValueError:
            raise ValidationError(f"MONGEO_THREADS must be a positive integer, got {raw!r}") from None
        if val < 1:
            raise ValidationError(f"MONGEO_THREADS must be a positive integer, got {raw!r}")
        return val
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    grad_tol: float = 1e-6
    density_floor: float = 1e-8
    line_search: str = "backtracking"
    init: str = "hellinger"
    memory: int = 20
    armijo: float = 1e-4
    shrink: float = 0.5
    rel_tol: float = 0.0

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValidationError("grad_tol must be positive")
        if not self.density_floor >= 0:
            raise ValidationError("density_floor must be nonnegative")
        if self.line_search != "backtracking":
            raise ValidationError(f"unknown line search {self.line_search!r}")
        if self.init not in ("hellinger", "linear", "given"):
            raise ValidationError(f"unknown initialization {self.init!r}")
        if int(self.max_iters) < 1:
            raise ValidationError("max_iters must be positive")


@dataclass
class GeodesicResult:
    path: PathGrid = field(repr=False)
    energy: EnergyBreakdown
    distance: float
    iterations: int
    grad_norm: float
    converged: bool
    init_energy: float = float("nan")
    near_degenerate: bool = False
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"distance": self.distance, "energy": self.energy.to_dict(),
                "iterations": self.iterations, "grad_norm": self.grad_norm,
                "converged": self.converged, "near_degenerate": self.near_degenerate}


# ---------------------------------------------------------------------------
# objective


def _action_and_grad(vals, h, dt, floor=0.0, want_grad=True):
    """Discrete action of a full nodal array and its gradient w.r.t. every node."""
    rho = np.diff(vals, axis=1) / h
    if floor > 0:
        rho = np.maximum(rho, floor)
    if np.any(rho < 0):
        raise ValidationError("negative cell density")
    s = np.sqrt(rho)
    theta = 0.5 * (vals[:, :-1] + vals[:, 1:])
    a = np.diff(theta, axis=0) / dt
    smid = 0.5 * (s[1:] + s[:-1])
    ds = np.diff(s, axis=0) / dt
    value = h * dt * float(np.sum(a * a * smid * smid + ds * ds))
    if not want_grad:
        return value, None
    w = h * dt
    g_theta = np.zeros_like(theta)
    term = 2.0 * a * smid * smid / dt
    g_theta[1:] += term
    g_theta[:-1] -= term
    g_s = np.zeros_like(s)
    kin = a * a * smid
    g_s[1:] += kin
    g_s[:-1] += kin
    fr = 2.0 * ds / dt
    g_s[1:] += fr
    g_s[:-1] -= fr
    if np.any((s == 0) & (g_s != 0)):
        k, c = np.argwhere((s == 0) & (g_s != 0))[0]
        raise DegenerateDensity(f"gradient undefined at zero density, time node {k}, cell {c}")
    with np.errstate(divide="ignore", invalid="ignore"):
        g_rho = np.where(s > 0, g_s / (2.0 * s), 0.0)
    grad = np.zeros_like(vals)
    grad[:, :-1] += 0.5 * g_theta - g_rho / h
    grad[:, 1:] += 0.5 * g_theta + g_rho / h
    return value, w * grad


def discrete_action(path: PathGrid, density_floor: float = 0.0):
    """Action of ``path`` and its gradient with respect to the nodal values.

    The gradient array has the shape of ``path.values`` and is zero on the
    end slices and the boundary columns, which are not free.
    Raises :class:`DegenerateDensity` if a cell density is below
    ``density_floor`` (strict check when the floor is 0 and a zero density
    has a nonzero derivative).
    """
    h, dt = path.sgrid.h, path.tgrid.dt
    rho = np.diff(path.values, axis=1) / h
    if density_floor > 0 and np.any(rho < density_floor):
        k, c = np.argwhere(rho < density_floor)[0]
        raise DegenerateDensity(f"cell density {rho[k, c]:.3e} below the floor at time node {k}, cell {c}")
    value, grad = _action_and_grad(path.values, h, dt)
    grad[0] = grad[-1] = 0.0
    grad[:, 0] = grad[:, -1] = 0.0
    return value, grad


# ---------------------------------------------------------------------------
# feasibility


def project_slices(vals, delta_h: float):
    """Map every row to a monotone slice with increments ``>= delta_h`` and ends 0, 1.

    Increments are clamped at ``delta_h`` and the excess over the floor is
    rescaled so the increments sum to one.  Rows already feasible are
    returned unchanged up to rounding.
    """
    vals = np.asarray(vals, dtype=float)
    inc = np.diff(vals, axis=-1)
    n = inc.shape[-1]
    if delta_h * n >= 1.0:
        raise ValidationError("density floor too large for the grid")
    excess = np.maximum(inc, delta_h) - delta_h
    total = excess.sum(axis=-1, keepdims=True)
    budget = 1.0 - n * delta_h
    # dividing first keeps the ratio in [0, 1] even for subnormal totals
    share = excess / np.where(total > 0, total, 1.0)
    scaled = np.where(total > 0, share * budget, budget / n)
    inc = delta_h + scaled
    out = np.zeros(vals.shape)
    out[..., 1:] = np.cumsum(inc, axis=-1)
    out[..., -1] = 1.0
    return out


def _preconditioner(n, m, h, dt):
    """Inverse of the action Hessian at the identity path, applied by sine transforms.

    At unit density the quadratic part separates into a time Laplacian
    times a space operator (a Laplacian from the Fisher-Rao term plus the
    averaging stencil of the kinetic term); both are diagonal in the
    type-I sine basis with Dirichlet ends.
    """
    p = np.arange(1, m)[:, None]
    q = np.arange(1, n)[None, :]
    lam_t = (2.0 - 2.0 * np.cos(np.pi * p / m)) / dt**2
    cq = np.cos(np.pi * q / n)
    lam_x = (2.0 - 2.0 * cq) / (4.0 * h * h) + 0.5 * (1.0 + cq)
    inv = 1.0 / (h * dt * lam_t * lam_x)

    def apply(g):
        out = np.zeros_like(g)
        out[1:-1, 1:-1] = idstn(dstn(g[1:-1, 1:-1], type=1) * inv, type=1)
        return out

    return apply


def _linear_init(phi0, phi1, tgrid):
    t = (tgrid.nodes / tgrid.T)[:, None] if tgrid.T > 0 else np.zeros((tgrid.m + 1, 1))
    return (1.0 - t) * phi0.values[None, :] + t * phi1.values[None, :]


# ---------------------------------------------------------------------------
# optimizer


def solve_geodesic(phi0: MonotoneMap, phi1: MonotoneMap, m: int = 32,
                   opts: SolverOptions | None = None, T: float = 1.0,
                   initial: PathGrid | None = None) -> GeodesicResult:
    """Minimize the discrete action over paths from ``phi0`` to ``phi1``.

    Returns the best path found.  ``converged`` is true when the gradient
    norm (scaled to an L2 norm on space-time) drops below ``grad_tol``.
    The loop also stops after fifty steps in a row whose relative decrease is
    at most ``rel_tol``; the result is then returned unconverged.
    """
    opts = opts or SolverOptions()
    if phi0.grid != phi1.grid:
        raise ValidationError("endpoint maps must share the grid")
    tgrid = TimeGrid(m, T)
    sgrid = phi0.grid
    h, dt = sgrid.h, tgrid.dt
    delta_h = opts.density_floor * h
    if opts.init == "given" or initial is not None:
        if initial is None:
            raise ValidationError("init='given' needs an initial path")
        if initial.tgrid != tgrid or initial.sgrid != sgrid:
            raise ValidationError("initial path does not match the grids")
        x0 = initial.values.copy()
    elif opts.init == "hellinger":
        x0 = hellinger_path(phi0, phi1, m, T).path.values.copy()
    else:
        x0 = _linear_init(phi0, phi1, tgrid)
    x0[0], x0[-1] = phi0.values, phi1.values
    x0[1:-1] = project_slices(x0[1:-1], delta_h)
    scale = 1.0 / np.sqrt(h * dt)
    precond = _preconditioner(sgrid.n, m, h, dt) if m >= 2 and sgrid.n >= 2 else (lambda g: g)

    def evaluate(x, grad=True):
        val, g = _action_and_grad(x, h, dt, want_grad=grad)
        if g is not None:
            g[0] = g[-1] = 0.0
            g[:, 0] = g[:, -1] = 0.0
        return val, g

    x = x0
    f, g = evaluate(x)
    init_energy = f
    history = [f]
    S, Y = [], []
    converged = False
    it = 0
    gnorm = float(np.linalg.norm(g) * scale)
    stall = 0
    while it < opts.max_iters:
        if gnorm <= opts.grad_tol:
            converged = True
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s_, y_ in zip(reversed(S), reversed(Y)):
            r = 1.0 / np.vdot(y_, s_)
            al = r * np.vdot(s_, q)
            q -= al * y_
            alphas.append((r, al))
        q = precond(q)
        if S:
            q *= np.vdot(S[-1], Y[-1]) / np.vdot(Y[-1], precond(Y[-1]))
        for (s_, y_), (r, al) in zip(zip(S, Y), reversed(alphas)):
            be = r * np.vdot(y_, q)
            q += (al - be) * s_
        d = -q
        if np.vdot(d, g) >= 0:
            S.clear()
            Y.clear()
            d = -precond(g)
        step = 1.0
        accepted = False
        for _ in range(60):
            xt = x + step * d
            xt[1:-1] = project_slices(xt[1:-1], delta_h)
            diff = xt - x
            decrease = np.vdot(g, diff)
            if decrease < 0:
                ft, _unused = evaluate(xt, grad=False)
                if ft <= f + opts.armijo * decrease:
                    accepted = True
                    break
            step *= opts.shrink
        it += 1
        if not accepted:
            if S:
                S.clear()
                Y.clear()
                continue
            converged = gnorm <= opts.grad_tol
            break
        ft, gt = evaluate(xt)
        s_vec, y_vec = xt - x, gt - g
        if np.vdot(s_vec, y_vec) > 1e-16 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            S.append(s_vec)
            Y.append(y_vec)
            if len(S) > opts.memory:
                S.pop(0)
                Y.pop(0)
        rel = (f - ft) / max(abs(f), 1e-300)
        x, f, g = xt, ft, gt
        history.append(f)
        gnorm = float(np.linalg.norm(g) * scale)
        stall = stall + 1 if rel <= opts.rel_tol else 0
        if stall >= 50:
            break
    if gnorm <= opts.grad_tol:
        converged = True
    path = PathGrid(tgrid, sgrid, x)
    energy = lagrangian_energy(path)
    rho_min = float(np.min(np.diff(x, axis=1))) / h
    return GeodesicResult(path=path, energy=energy, distance=float(np.sqrt(energy.total)),
                          iterations=it, grad_norm=gnorm, converged=converged,
                          init_energy=init_energy,
                          near_degenerate=rho_min <= 10 * opts.density_floor,
                          history=history)


# ---------------------------------------------------------------------------
# Euler-Lagrange residual


def el_residual(path: PathGrid, reading: str = "derived", return_field: bool = False):
    """Max-norm residual of the Euler-Lagrange equation of the action.

    Evaluated at cell centres and interior time nodes with centred
    differences; cells next to the boundary are skipped.  ``reading``
    selects the last term: ``derived`` uses ``(1/4) d_x[(d_t log phi_x)**2]``
    (what the variation of the action produces), ``literal`` uses
    ``(1/4) d_xt log phi_x``.
    """
    if reading not in ("derived", "literal"):
        raise ValueError(f"unknown reading {reading!r}")
    vals = path.values
    h, dt = path.sgrid.h, path.tgrid.dt
    rho = np.diff(vals, axis=1) / h
    if np.any(rho <= 0):
        k, c = np.argwhere(rho <= 0)[0]
        raise DegenerateDensity(f"zero cell density at time node {k}, cell {c}")
    if path.tgrid.m < 2 or path.sgrid.n < 3:
        return (0.0, np.zeros((0, 0))) if return_field else 0.0
    theta = 0.5 * (vals[:, :-1] + vals[:, 1:])
    logr = np.log(rho)

    def dt_c(a):
        return (a[2:] - a[:-2]) / (2 * dt)

    def dtt(a):
        return (a[2:] - 2 * a[1:-1] + a[:-2]) / (dt * dt)

    def dx_c(a):
        return (a[:, 2:] - a[:, :-2]) / (2 * h)

    phit = dt_c(theta)
    phitt = dtt(theta)
    phitx = dt_c(rho)
    q = dt_c(logr)
    rho_i = rho[1:-1]
    res = (-2 * phitt[:, 1:-1] * rho_i[:, 1:-1]
           - 2 * phit[:, 1:-1] * phitx[:, 1:-1]
           - dx_c(phit * phit)
           + 0.5 * dx_c(dtt(logr)))
    if reading == "derived":
        res = res + 0.25 * dx_c(q * q)
    else:
        res = res + 0.25 * dx_c(q)
    worst = float(np.max(np.abs(res))) if res.size else 0.0
    return (worst, res) if return_field else worst


# ---------------------------------------------------------------------------
# metric diagnostics


@dataclass
class MetricReport:
    distances: dict
    triangle_gap: float
    triangle_ok: bool
    symmetry_rel: float
    symmetry_ok: bool
    invariance_rel: float
    invariance_ok: bool
    sup_ratio: float
    sup_ok: bool
    results: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.triangle_ok and self.symmetry_ok and self.invariance_ok and self.sup_ok

    def to_dict(self) -> dict:
        return {"distances": self.distances, "triangle_gap": self.triangle_gap,
                "triangle_ok": self.triangle_ok, "symmetry_rel": self.symmetry_rel,
                "symmetry_ok": self.symmetry_ok, "invariance_rel": self.invariance_rel,
                "invariance_ok": self.invariance_ok, "sup_ratio": self.sup_ratio,
                "sup_ok": self.sup_ok}


def _rel(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def metric_diagnostics(a: MonotoneMap, b: MonotoneMap, c: MonotoneMap, eta: MonotoneMap,
                       m: int = 32, opts: SolverOptions | None = None,
                       tol: float = 0.02, triangle_tol: float | None = None) -> MetricReport:
    """Solve the pairs needed to test the metric axioms on ``(a, b, c)``.

    Checks the triangle inequality ``d(a,c) <= d(a,b) + d(b,c)`` up to
    ``triangle_tol`` (default: ``tol`` times the right side), symmetry of
    ``d(a,b)``, invariance of ``d(a,b)`` under right composition with
    ``eta``, and ``sup|x - y| <= 2 d(x, y)`` on every solved pair.  The
    independent solves run on ``MONGEO_THREADS`` threads.
    """
    opts = opts or SolverOptions()
    pairs = {
        "ab": (a, b), "ba": (b, a), "bc": (b, c), "ac": (a, c),
        "ab_eta": (compose(a, eta), compose(b, eta)),
    }
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(pairs))) as pool:
        futures = {k: pool.submit(solve_geodesic, p, q, m, opts) for k, (p, q) in pairs.items()}
        results = {k: fut.result() for k, fut in futures.items()}
    d = {k: r.distance for k, r in results.items()}
    rhs = d["ab"] + d["bc"]
    ttol = tol * rhs if triangle_tol is None else triangle_tol
    tri_gap = d["ac"] - rhs
    sup_ratio = 0.0
    for k, (p, q) in pairs.items():
        sup = float(np.max(np.abs(p.values - q.values)))
        if sup > 0:
            sup_ratio = max(sup_ratio, sup / (2.0 * d[k]) if d[k] > 0 else np.inf)
    sym = _rel(d["ab"], d["ba"])
    inv = _rel(d["ab"], d["ab_eta"])
    return MetricReport(d, tri_gap, tri_gap <= ttol, sym, sym <= tol, inv, inv <= tol,
                        sup_ratio, sup_ratio <= 1.0, results)


def sup_norm_check(result: GeodesicResult) -> float:
    """``sup|phi0 - phi1| / (2 distance)``; at most 1 for any valid distance."""
    p = result.path
    sup = float(np.max(np.abs(p.values[0] - p.values[-1])))
    if sup == 0:
        return 0.0
    return sup / (2.0 * result.distance) if result.distance > 0 else float("inf")


def refine_map(phi: MonotoneMap, n: int) -> MonotoneMap:
    """Resample a map on a grid of ``n`` cells by linear interpolation."""
    grid = SpaceGrid(n)
    return MonotoneMap(grid, np.interp(grid.nodes, phi.grid.nodes, phi.values))
