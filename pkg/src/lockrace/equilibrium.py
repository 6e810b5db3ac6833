"""Reduced first-lock game and its Nash equilibrium.

Once the thresholds for locks 2..M are fixed by the backward recursion, each
player only chooses how long to chase lock 1.  Player ``i``'s utility from
stopping at ``theta`` is

    gamma_i(theta) = int_0^theta ((c_1 + U_2(t)) eta_i(t) - nu) beta_i e^{-beta_i t} dt

where ``eta_i`` is the probability that no opponent has reached lock 1 yet.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    DEFAULT_GRID_SIZE,
    GameConfig,
    StrategyProfile,
    check_config,
    eta_first_lock,
)
from .quadrature import simpson
from .recursion import ROOT_TOL, ContinuationValues, backward_recursion

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500
DAMPING = 0.5
STALL_SWEEPS = 10


@dataclass(frozen=True)
class EquilibriumResult:
    profile: StrategyProfile
    continuation: tuple
    iterations: int
    final_update_norm: float
    converged: bool
    tolerance: float = DEFAULT_TOL
    damped: bool = False

    @property
    def first_thresholds(self) -> np.ndarray:
        return self.profile.first_thresholds()

    def to_dict(self) -> dict:
        return {
            "players": [{"theta": list(s.thresholds)} for s in self.profile],
            "iterations": self.iterations,
            "converged": self.converged,
            "final_update_norm": self.final_update_norm,
        }


class EquilibriumNotConverged(RuntimeError):
    """Fixed-point iteration hit ``max_iterations``; carries the last iterate."""

    def __init__(self, result: EquilibriumResult):
        self.result = result
        super().__init__(
            f"no convergence after {result.iterations} sweeps "
            f"(last update {result.final_update_norm:.3e})"
        )


@dataclass(frozen=True)
class DeviationReport:
    player: int
    candidates: np.ndarray = field(repr=False)
    utilities: np.ndarray = field(repr=False)
    best_candidate: float
    equilibrium_utility: float
    gap: float
    derivative_sign_changes: int


def _check_theta(theta, T):
    if not (0.0 <= theta <= T):
        raise ValueError(f"threshold {theta} outside [0, {T}]")


def _first_lock_integrand(i, first_thresholds, cv: ContinuationValues, cfg: GameConfig):
    c1, nu, beta = cfg.rewards[i][0], cfg.cost_factor, cfg.rates[i]
    upsilon2 = cv.upsilon2

    def f(t):
        eta = eta_first_lock(t, i, first_thresholds, cfg.rates)
        return ((c1 + upsilon2(t)) * eta - nu) * beta * np.exp(-beta * t)

    return f


def gamma_first_lock(theta, i, first_thresholds, cv: ContinuationValues, cfg: GameConfig):
    """Utility of player ``i`` from chasing lock 1 until ``theta``.

    ``first_thresholds`` holds every player's lock-1 threshold; entry ``i`` is
    ignored.  Simpson panels break at the opponents' thresholds (kinks of
    ``eta``) and at the continuation grid.
    """
    T = cfg.horizon
    _check_theta(theta, T)
    if theta == 0.0:
        return 0.0
    f = _first_lock_integrand(i, first_thresholds, cv, cfg)
    opp = np.delete(np.asarray(first_thresholds, dtype=float), i)
    return simpson(f, 0.0, theta, opp, cv.upsilon2.grid)


def gamma_derivative(theta, i, first_thresholds, cv: ContinuationValues, cfg: GameConfig):
    """d gamma_i / d theta, the integrand at the upper limit."""
    _check_theta(theta, cfg.horizon)
    return float(_first_lock_integrand(i, first_thresholds, cv, cfg)(theta))


def best_response_first_threshold(i, first_thresholds, cv: ContinuationValues,
                                  cfg: GameConfig, tol: float = ROOT_TOL) -> float:
    """inf{t : (c_1 + U_2(t)) eta_i(t) <= nu}, capped at T."""
    c1, nu, T = cfg.rewards[i][0], cfg.cost_factor, cfg.horizon
    upsilon2 = cv.upsilon2

    def excess(t):
        return (c1 + upsilon2(t)) * eta_first_lock(t, i, first_thresholds, cfg.rates) - nu

    if excess(0.0) <= 0.0:
        return 0.0
    if excess(T) > 0.0:
        return T
    lo, hi = 0.0, T
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def player_continuations(cfg: GameConfig, grid_size: int = DEFAULT_GRID_SIZE) -> tuple:
    """Backward recursion for every player; identical players share one solve."""
    cache = {}
    out = []
    for i in range(cfg.n):
        key = (cfg.rates[i], cfg.rewards[i])
        if key not in cache:
            cache[key] = backward_recursion(cfg, i, grid_size)
        cv = cache[key]
        if cv.player != i:
            cv = ContinuationValues(
                i, cv.thresholds, cv.curves, cv.horizon, cv.grid_size, cv.boundary_ties
            )
        out.append(cv)
    return tuple(out)


def _profile(first, continuation) -> StrategyProfile:
    return StrategyProfile.from_array(
        [[first[i], *cv.thresholds] for i, cv in enumerate(continuation)]
    )


def solve_equilibrium(cfg: GameConfig, grid_size: int = DEFAULT_GRID_SIZE,
                      tolerance: float = DEFAULT_TOL,
                      max_iterations: int = DEFAULT_MAX_ITER,
                      raise_on_failure: bool = True) -> EquilibriumResult:
    """Unique MT-threshold equilibrium via Gauss-Seidel best-response sweeps.

    Starts from everyone chasing lock 1 until ``T``.  If the largest update
    fails to shrink for ``STALL_SWEEPS`` consecutive sweeps, updates are
    damped by half.  Raises ``EquilibriumNotConverged`` unless
    ``raise_on_failure`` is false, in which case the unconverged result is
    returned with ``converged=False``.
    """
    check_config(cfg)
    continuation = player_continuations(cfg, grid_size)
    first = np.full(cfg.n, cfg.horizon)
    step = 1.0
    best_norm = math.inf
    stalled = 0
    norm = math.inf
    sweeps = 0
    while sweeps < max_iterations:
        sweeps += 1
        norm = 0.0
        for i in range(cfg.n):
            target = best_response_first_threshold(i, first, continuation[i], cfg)
            norm = max(norm, abs(target - first[i]))
            first[i] += step * (target - first[i])
        if norm <= tolerance:
            break
        if norm < best_norm:
            best_norm, stalled = norm, 0
        else:
            stalled += 1
            if stalled >= STALL_SWEEPS and step == 1.0:
                log.info("best-response sweeps stalled at %.3e; damping", norm)
                step = DAMPING
    converged = bool(norm <= tolerance)
    result = EquilibriumResult(
        _profile(first, continuation), continuation, sweeps, float(norm), converged,
        tolerance, step != 1.0,
    )
    if not converged and raise_on_failure:
        raise EquilibriumNotConverged(result)
    return result


def fixed_point_residual(result: EquilibriumResult, cfg: GameConfig) -> float:
    first = result.first_thresholds
    return max(
        abs(best_response_first_threshold(i, first, result.continuation[i], cfg) - first[i])
        for i in range(cfg.n)
    )


def verify_equilibrium(result: EquilibriumResult, cfg: GameConfig,
                       candidates: int = 400) -> list:
    """Sweep unilateral lock-1 deviations for every player and report the gain."""
    T = cfg.horizon
    first = result.first_thresholds
    thetas = np.linspace(0.0, T, candidates)
    reports = []
    for i in range(cfg.n):
        cv = result.continuation[i]
        utils = np.array([gamma_first_lock(th, i, first, cv, cfg) for th in thetas])
        deriv = np.array([gamma_derivative(th, i, first, cv, cfg) for th in thetas])
        eq_util = gamma_first_lock(first[i], i, first, cv, cfg)
        signs = np.sign(deriv[deriv != 0.0])
        changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
        best = int(np.argmax(utils))
        reports.append(DeviationReport(
            i, thetas, utils, float(thetas[best]), eq_util,
            float(utils[best] - eq_util), changes,
        ))
    return reports


@dataclass(frozen=True)
class AsymptoticResult:
    """Large-horizon closed-form equilibrium, or the reason it does not apply."""

    applicable: bool
    branch: str | None
    profile: StrategyProfile | None
    reason: str = ""
    ordering_holds: bool | None = None
    effective_last_lock: int | None = None


def _equal_rates(cfg):
    return len(set(cfg.rates)) == 1


def _is_monotone(cfg):
    R = np.array(cfg.rewards)
    return bool(np.all(R[:-1] >= R[1:])) and R[-1, -1] >= cfg.M * cfg.cost_factor


def _first_threshold_closed_form(value, nu, opponents, beta, T):
    """max(0, log(value / nu) / (opponents * beta)), capped at T."""
    if value <= nu:
        return 0.0
    if opponents == 0:
        return T
    return min(T, math.log(value / nu) / (opponents * beta))


def _symmetric_branch(cfg):
    M, n, nu, T = cfg.M, cfg.n, cfg.cost_factor, cfg.horizon
    beta = cfg.rates[0]
    c = cfg.rewards[0]
    last = M
    thetas = {}
    for k in range(M, 1, -1):
        # locks k..last are worth chasing together if they pay for their costs
        keep = sum(c[k - 1 : last]) >= (last - k + 1) * nu
        thetas[k] = T if keep else 0.0
        if not keep:
            last = k - 1
    value = sum(c[:last]) - (last - 1) * nu
    theta1 = _first_threshold_closed_form(value, nu, n - 1, beta, T)
    row = [theta1] + [thetas[k] for k in range(2, M + 1)]
    return StrategyProfile.from_array([row] * n), last


def _monotone_branch(cfg):
    M, n, nu, T = cfg.M, cfg.n, cfg.cost_factor, cfg.horizon
    beta = cfg.rates[0]
    values = [sum(c) - (M - 1) * nu for c in cfg.rewards]
    first = np.zeros(n)
    for p in range(n - 1, -1, -1):
        later = float(np.sum(first[p + 1 :]))
        if p > 0:
            # players ahead of p are assumed to hold on longer than p does
            if values[p] <= 0.0:
                theta = 0.0
            else:
                theta = (math.log(values[p] / nu) - beta * later) / (p * beta)
        else:
            theta = _top_player_threshold(values[0], nu, beta, first[1:], T)
        first[p] = min(max(theta, 0.0), T)
    ordering = bool(np.all(first[:-1] >= first[1:]))
    rows = [[first[p]] + [T] * (M - 1) for p in range(n)]
    return StrategyProfile.from_array(rows), ordering


def _top_player_threshold(value, nu, beta, others, T):
    # nobody outlasts the top player: its exposure saturates at sum(others)
    def lhs(t):
        return value * math.exp(-beta * float(np.sum(np.minimum(t, others))))

    if lhs(0.0) <= nu:
        return 0.0
    if lhs(T) > nu:
        return T
    lo, hi = 0.0, T
    while hi - lo > ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if lhs(mid) <= nu:
            hi = mid
        else:
            lo = mid
    return hi


def asymptotic_equilibrium(cfg: GameConfig, branch: str = "auto") -> AsymptoticResult:
    """Closed-form large-``T`` equilibrium for symmetric or reward-ordered games.

    ``branch`` is ``"symmetric"``, ``"monotone"`` or ``"auto"`` (symmetric when
    every player is identical, monotone otherwise).  Both branches need equal
    contact rates.  The monotone branch needs rewards ordered across players
    (``rewards[i][k] >= rewards[i+1][k]``) and ``rewards[-1][-1] >= M * nu``.
    """
    check_config(cfg)
    if not _equal_rates(cfg):
        return AsymptoticResult(False, None, None, "closed forms need equal rates")
    symmetric = len(set(cfg.rewards)) == 1
    if branch == "auto":
        branch = "symmetric" if symmetric else "monotone"
    if branch == "symmetric":
        if not symmetric:
            return AsymptoticResult(False, None, None, "rewards differ across players")
        profile, last = _symmetric_branch(cfg)
        return AsymptoticResult(True, "symmetric", profile, ordering_holds=True,
                                effective_last_lock=last)
    if branch == "monotone":
        if not _is_monotone(cfg):
            return AsymptoticResult(
                False, None, None,
                "monotone branch needs ordered rewards and last reward >= M * nu",
            )
        profile, ordering = _monotone_branch(cfg)
        return AsymptoticResult(True, "monotone", profile, ordering_holds=ordering,
                                effective_last_lock=cfg.M)
    raise ValueError(f"unknown branch {branch!r}")
