"""Reference computations that share no code with the package."""

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded


def e_sh_discrete(u, w, length, weight=1.0, N=2000):
    """Minimize the discrete ``sum h v^2 + weight sum (dv)^2 / h`` with fixed ends.

    The first-order condition is a tridiagonal system; the returned value is
    the discrete energy of its solution (trapezoid weights for ``v^2``).
    """
    h = length / N
    k = weight / h
    # interior unknowns v_1..v_{N-1}: (h + 2k) v_i - k v_{i-1} - k v_{i+1} = 0
    ab = np.zeros((3, N - 1))
    ab[0, 1:] = -k
    ab[1, :] = h + 2 * k
    ab[2, :-1] = -k
    rhs = np.zeros(N - 1)
    rhs[0] += k * u
    rhs[-1] += k * w
    v = np.concatenate(([u], solve_banded((1, 1), ab, rhs), [w]))
    mass = h * (np.sum(v[1:-1] ** 2) + 0.5 * (u * u + w * w))
    return mass + k * np.sum(np.diff(v) ** 2)


def e_sh_quadrature(u, w, length, weight=1.0):
    """``int v^2 + weight v'^2`` of the sinh interpolant by adaptive quadrature."""
    c = np.sqrt(weight)
    s = np.sinh(length / c)

    def v(x):
        return (w * np.sinh(x / c) + u * np.sinh((length - x) / c)) / s

    def dv(x):
        return (w * np.cosh(x / c) - u * np.cosh((length - x) / c)) / (c * s)

    val, _ = integrate.quad(lambda x: v(x) ** 2 + weight * dv(x) ** 2, 0.0, length,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def lagrangian_quadrature(phi_t, phi_x, phi_tx, T=1.0):
    """``int_0^T int_0^1 phi_t^2 phi_x + phi_tx^2 / (4 phi_x)`` by adaptive double quadrature."""
    def f(x, t):
        a = phi_x(t, x)
        return phi_t(t, x) ** 2 * a + 0.25 * phi_tx(t, x) ** 2 / a
    val, _ = integrate.dblquad(f, 0.0, T, 0.0, 1.0, epsabs=1e-12, epsrel=1e-10)
    return val


def logistic_flow(x, t):
    """Exact flow of ``y' = y (1 - y)``."""
    e = np.exp(t)
    return x * e / (1 - x + x * e)


def hellinger_sq_analytic_square():
    """``int_0^1 (1 - sqrt(2 x))^2 dx``."""
    return 2.0 - 4.0 * np.sqrt(2.0) / 3.0


def pushforward_histogram(locations, widths, density, bins, samples=400_000):
    """Monte-Carlo-free histogram oracle: push a fine midpoint sample of ``f dx`` through ``F``."""
    x = (np.arange(samples) + 0.5) / samples
    n = len(density)
    weights = np.asarray(density)[np.minimum((x * n).astype(int), n - 1)] / samples
    shift = np.zeros_like(x)
    for loc, wid in zip(locations, widths):
        shift += np.where(x > loc, wid, 0.0)
    y = x + shift
    total = 1.0 + float(np.sum(widths))
    hist, _ = np.histogram(y, bins=bins, range=(0.0, total), weights=weights)
    return hist


def eulerian_quadrature(v, T=1.0):
    """``int_0^T int_0^1 v^2 + v_x^2 / 4`` for a callable pair ``v = (f, f_x)``."""
    f, fx = v
    val, _ = integrate.dblquad(lambda x, t: f(t, x) ** 2 + 0.25 * fx(t, x) ** 2, 0.0, T, 0.0, 1.0,
                               epsabs=1e-12, epsrel=1e-10)
    return val


def moving_jump_path(n, m, moving=True):
    """Piecewise-linear path with one jump at x = 1/2 whose limits drift apart linearly."""
    from mongeo.core import JumpRecord, PathGrid, SpaceGrid, TimeGrid

    tg, g = TimeGrid(m), SpaceGrid(n)
    t, x = tg.nodes[:, None], g.nodes[None, :]
    a = 0.35 + (0.05 * t if moving else 0 * t)
    b = 0.65 - (0.05 * t if moving else 0 * t)
    vals = np.where(x < 0.5, x * a / 0.5, b + (x - 0.5) * (1 - b) / 0.5)
    jr = JumpRecord(0.5, a[:, 0], b[:, 0], np.full(m + 1, 0.05 if moving else 0.0),
                    np.full(m + 1, -0.05 if moving else 0.0))
    return PathGrid(tg, g, vals), [jr]
