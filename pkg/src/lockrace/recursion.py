"""Backward recursion for the continuation values of locks 2..M.

For a player who has just acquired lock ``k - 1`` at time ``t`` the optimal
remaining payoff is

    U_k(t) = 1{t < theta_k} * int_t^theta_k (c_k + U_{k+1}(s) - nu) beta e^{-beta (s - t)} ds

with ``theta_k = inf{t : c_k + U_{k+1}(t) <= nu}`` (``T`` if never).  Curves are
built from lock M downwards, each from the one above it.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .model import DEFAULT_GRID_SIZE, GameConfig, SampledFunction, check_config, uniform_grid
from .quadrature import simpson

ROOT_TOL = 1e-10


@dataclass(frozen=True)
class ContinuationValues:
    """Thresholds and value curves for locks 2..M of one player."""

    player: int
    thresholds: tuple
    curves: tuple
    horizon: float
    grid_size: int = DEFAULT_GRID_SIZE
    boundary_ties: tuple = field(default=())

    def curve(self, k: int) -> SampledFunction:
        """Curve for lock ``k`` (2 <= k <= M)."""
        return self.curves[k - 2]

    def threshold(self, k: int) -> float:
        return self.thresholds[k - 2]

    @property
    def upsilon2(self) -> SampledFunction:
        if self.curves:
            return self.curves[0]
        return SampledFunction.zeros(0.0, self.horizon, self.grid_size)


def terminal_stage(cfg: GameConfig, i: int, grid_size: int = DEFAULT_GRID_SIZE):
    """Threshold and closed-form value curve of the last lock."""
    check_config(cfg)
    c, nu, beta, T = cfg.rewards[i][-1], cfg.cost_factor, cfg.rates[i], cfg.horizon
    theta = T if c > nu else 0.0
    return theta, _closed_form_last(c, nu, beta, theta, T, grid_size)


def _closed_form_last(c, nu, beta, theta, T, grid_size):
    grid = uniform_grid(0.0, T, grid_size)
    vals = (c - nu) * -np.expm1(-beta * (theta - grid))
    vals = np.where(grid < theta, vals, 0.0)
    return SampledFunction(0.0, T, vals)


def threshold_root(upsilon_next: SampledFunction, c_k: float, nu: float, T: float,
                   tol: float = ROOT_TOL) -> float:
    """Smallest ``t`` in ``[0, T]`` with ``c_k + upsilon_next(t) <= nu``; ``T`` if none."""
    def excess(t):
        return c_k + upsilon_next(t) - nu

    if excess(0.0) <= 0.0:
        return 0.0
    if excess(T) > 0.0:
        return float(T)
    lo, hi = 0.0, float(T)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def _rk4_step(y, q0, qm, q1, lam, dt):
    # y' = lam * y + q(t), with q sampled at the step start, midpoint and end
    k1 = lam * y + q0
    k2 = lam * (y + 0.5 * dt * k1) + qm
    k3 = lam * (y + 0.5 * dt * k2) + qm
    k4 = lam * (y + dt * k3) + q1
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_affine(lam, dt):
    """Coefficients (A, b0, bm, b1) with step(y) = A y + b0 q0 + bm qm + b1 q1."""
    return tuple(
        _rk4_step(*basis, lam, dt)
        for basis in ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))
    )


def integrate_stage(c_k, nu, beta, theta, upsilon_next: SampledFunction, T, grid_size):
    """Value curve of a lock attempted until ``theta``, integrated backward from it.

    Solves U' = beta U - beta (c_k + upsilon_next - nu) with U(theta) = 0 by the
    classical RK4 method on the uniform grid, then zero-extends past ``theta``.
    """
    grid = uniform_grid(0.0, T, grid_size)
    vals = np.zeros(grid_size)
    if theta <= 0.0:
        return SampledFunction(0.0, T, vals)

    def forcing(t):
        return -beta * (c_k + upsilon_next(t) - nu)

    top = int(np.searchsorted(grid, theta, side="right")) - 1
    top = min(top, grid_size - 1)
    if grid[top] < theta:
        A, b0, bm, b1 = _rk4_affine(beta, grid[top] - theta)
        mid = 0.5 * (grid[top] + theta)
        vals[top] = b0 * forcing(theta) + bm * forcing(mid) + b1 * forcing(grid[top])
    if top == 0:
        return SampledFunction(0.0, T, vals)

    A, b0, bm, b1 = _rk4_affine(beta, -(T / (grid_size - 1)))
    lower = grid[:top]
    upper = grid[1 : top + 1]
    drive = b0 * forcing(upper) + bm * forcing(0.5 * (lower + upper)) + b1 * forcing(lower)
    # y_j = A y_{j+1} + drive_j, run from j = top - 1 down to 0
    out, _ = lfilter([1.0], [1.0, -A], drive[::-1], zi=[A * vals[top]])
    vals[:top] = out[::-1]
    return SampledFunction(0.0, T, vals)


def stage_values(cfg: GameConfig, i: int, thresholds, grid_size: int = DEFAULT_GRID_SIZE):
    """Value curves for locks 2..M under *given* thresholds ``theta_2..theta_M``.

    Used to price arbitrary MT strategies; ``backward_recursion`` is the special
    case where each threshold is chosen optimally.
    """
    M = cfg.M
    thresholds = [float(x) for x in thresholds]
    if len(thresholds) != M - 1:
        raise ValueError(f"expected {M - 1} thresholds for locks 2..{M}")
    if M == 1:
        return ()
    c, nu, beta, T = cfg.rewards[i], cfg.cost_factor, cfg.rates[i], cfg.horizon
    curves = [_closed_form_last(c[-1], nu, beta, thresholds[-1], T, grid_size)]
    for k in range(M - 1, 1, -1):
        curves.append(
            integrate_stage(c[k - 1], nu, beta, thresholds[k - 2], curves[-1], T, grid_size)
        )
    return tuple(reversed(curves))


def backward_recursion(cfg: GameConfig, i: int, grid_size: int = DEFAULT_GRID_SIZE
                       ) -> ContinuationValues:
    """Optimal thresholds and value curves of player ``i`` for locks 2..M."""
    check_config(cfg)
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    M, T, nu = cfg.M, cfg.horizon, cfg.cost_factor
    c, beta = cfg.rewards[i], cfg.rates[i]
    ties = tuple(k for k in range(2, M + 1) if c[k - 1] == nu)
    if M == 1:
        return ContinuationValues(i, (), (), T, grid_size, ties)

    theta_M, curve = terminal_stage(cfg, i, grid_size)
    thetas, curves = [theta_M], [curve]
    for k in range(M - 1, 1, -1):
        theta_k = threshold_root(curves[-1], c[k - 1], nu, T)
        curves.append(integrate_stage(c[k - 1], nu, beta, theta_k, curves[-1], T, grid_size))
        thetas.append(theta_k)
    return ContinuationValues(
        i, tuple(reversed(thetas)), tuple(reversed(curves)), T, grid_size, ties
    )


def quadrature_check(cv: ContinuationValues, cfg: GameConfig, i: int, samples: int = 50,
                     seed: int = 0) -> float:
    """Largest gap between stored curves and direct Simpson quadrature of their integral.

    Sample times are drawn among the stored grid abscissae so the comparison is
    against stored values rather than interpolated ones.
    """
    if not cv.curves:
        return 0.0
    rng = np.random.default_rng(seed)
    c, nu, beta, T = cfg.rewards[i], cfg.cost_factor, cfg.rates[i], cfg.horizon
    M = cfg.M
    worst = 0.0
    for k in range(2, M + 1):
        curve = cv.curve(k)
        theta = cv.threshold(k)
        grid = curve.grid
        nxt = cv.curve(k + 1) if k < M else None
        idx = rng.choice(curve.grid_size, size=min(samples, curve.grid_size), replace=False)
        for j in idx:
            t = grid[j]
            if t >= theta:
                expected = 0.0
            else:
                def integrand(s, t=t):
                    cont = nxt(s) if nxt is not None else 0.0
                    return (c[k - 1] + cont - nu) * beta * np.exp(-beta * (s - t))

                expected = simpson(integrand, t, theta, grid)
            worst = max(worst, abs(expected - curve.values[j]))
    return worst


def continuation_csv(cvs, stream=None) -> str:
    """Write curves (player, k, t, upsilon) then a (player, k, threshold) block.

    Player numbers in the file are 1-based.
    """
    buf = stream if stream is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["player", "k", "t", "upsilon"])
    for cv in cvs:
        for k in range(2, len(cv.curves) + 2):
            curve = cv.curve(k)
            for t, v in zip(curve.grid, curve.values):
                writer.writerow([cv.player + 1, k, repr(float(t)), repr(float(v))])
    writer.writerow([])
    writer.writerow(["player", "k", "threshold"])
    for cv in cvs:
        for k in range(2, len(cv.curves) + 2):
            writer.writerow([cv.player + 1, k, repr(cv.threshold(k))])
    return buf.getvalue() if stream is None else ""
