"""Randomised instance generators and pass/fail check suites."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle
from .equilibrium import (
    EquilibriumResult,
    asymptotic_equilibrium,
    fixed_point_residual,
    verify_equilibrium,
)
from .model import GameConfig, SampledFunction
from .recursion import quadrature_check, threshold_root

GAP_TOL = 1e-6
QUADRATURE_TOL = 1e-6
LEMMA3_TOL = 1e-9
COST_TOL = 1e-9
ASYMPTOTIC_TOL = 0.05


@dataclass(frozen=True)
class CheckRow:
    case: str
    instance: int
    value: float
    passed: bool
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "instance", int(self.instance))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "passed", bool(self.passed))


def random_decreasing_problem(rng, segments=12, grid_size=241) -> oracle.StageProblem:
    """Stage problem with a strictly decreasing, non-negative gain starting at 0."""
    T = rng.uniform(2.0, 8.0)
    beta = rng.uniform(0.5, 2.0)
    nu = rng.uniform(0.5, 2.0)
    a0, a1, b = rng.uniform(0.0, 3.0 * nu), rng.uniform(0.1, 2.0 * nu), rng.uniform(0.1, 1.0)
    h = SampledFunction.from_callable(
        lambda t: a0 * np.exp(-b * t) + a1 * (T - t) / T, 0.0, T, grid_size
    )
    return oracle.StageProblem(h, nu, 0.0, T, beta)


def random_control(rng, start, end, bound, segments=None) -> oracle.PiecewiseConstantControl:
    segments = segments or int(rng.integers(3, 13))
    return oracle.PiecewiseConstantControl(start, end, rng.uniform(0.0, bound, segments), bound)


def random_problem(rng, grid_size=121) -> oracle.StageProblem:
    """Stage problem with an arbitrary (not monotone) non-negative gain."""
    T = rng.uniform(1.0, 6.0)
    h = SampledFunction(0.0, T, rng.uniform(0.0, 4.0, grid_size))
    return oracle.StageProblem(h, rng.uniform(0.2, 2.0), 0.0, T, rng.uniform(0.5, 2.0))


def bangbang_case(seed, instances=50, segments=12):
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(instances):
        problem = random_decreasing_problem(rng, segments)
        best = oracle.exhaustive_bang_bang_best_response(problem, segments)
        cut = oracle.cut_time(best, problem)
        root = threshold_root(problem.h, 0.0, problem.nu, problem.horizon)
        width = problem.horizon / segments
        miss = abs(cut - root)
        ok = best.is_threshold and miss <= width + 1e-9
        rows.append(CheckRow("bangbang", j, miss / width, ok,
                             "" if best.is_threshold else "maximiser not a prefix"))
    return rows


def lemma1_case(seed, instances=100):
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(instances):
        T, beta = rng.uniform(1.0, 5.0), rng.uniform(0.5, 2.0)
        control = random_control(rng, 0.0, T, beta)
        opp_rate, opp_theta = rng.uniform(0.0, 3.0), rng.uniform(0.0, T)
        eta = SampledFunction.from_callable(
            lambda t: np.exp(-opp_rate * np.minimum(t, opp_theta)), 0.0, T, 401
        )
        shifted = oracle.threshold_rearrangement(control)
        cost_gap = abs(oracle.expected_cost(shifted) - oracle.expected_cost(control))
        gain = oracle.success_probability(shifted, eta) - oracle.success_probability(control, eta)
        grid = np.linspace(0.0, T, 201)
        cdf_gain = np.min(shifted.accumulated(grid) - control.accumulated(grid))
        ok = cost_gap <= COST_TOL and gain >= -1e-12 and cdf_gain >= -1e-12
        rows.append(CheckRow("lemma1", j, cost_gap, ok, f"success gain {gain:.3e}"))
    return rows


def lemma3_case(seed, instances=100):
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(instances):
        problem = random_problem(rng)
        control = random_control(rng, 0.0, problem.horizon, problem.beta)
        x0 = rng.uniform(0.0, 5.0)
        res = oracle.lemma3_residual(problem, control, x0)
        rows.append(CheckRow("lemma3", j, res, res <= LEMMA3_TOL))
    return rows


def suffix_case(seed, instances=20, segments=12):
    rng = np.random.default_rng(seed)
    rows = []
    for j in range(instances):
        problem = random_decreasing_problem(rng, segments)
        k = int(rng.integers(1, segments))
        tau = problem.start + k * (problem.horizon - problem.start) / segments
        frac = oracle.suffix_consistency_check(problem, tau, segments)
        boundary = frac > 0 and frac * (segments - k) <= 1 + 1e-9
        rows.append(CheckRow("suffix", j, frac, frac == 0 or boundary,
                             "boundary tie" if boundary else ""))
    return rows


ORACLE_CASES = {
    "bangbang": bangbang_case,
    "lemma1": lemma1_case,
    "lemma3": lemma3_case,
    "suffix": suffix_case,
}


def equilibrium_suite(result: EquilibriumResult, cfg: GameConfig, candidates=400):
    rows = []
    for rep in verify_equilibrium(result, cfg, candidates):
        rows.append(CheckRow("deviation", rep.player, rep.gap,
                             rep.gap <= GAP_TOL and rep.derivative_sign_changes <= 1,
                             f"derivative sign changes {rep.derivative_sign_changes}"))
    res = fixed_point_residual(result, cfg)
    rows.append(CheckRow("fixed_point", -1, res, res <= 10 * result.tolerance))
    return rows


def quadrature_suite(result: EquilibriumResult, cfg: GameConfig, samples=50, seed=0):
    return [
        CheckRow("quadrature", i, r, r < QUADRATURE_TOL)
        for i, cv in enumerate(result.continuation)
        for r in [quadrature_check(cv, cfg, i, samples, seed)]
    ]


def asymptotic_suite(result: EquilibriumResult, cfg: GameConfig):
    approx = asymptotic_equilibrium(cfg)
    if not approx.applicable:
        return [CheckRow("asymptotic", -1, float("nan"), True, approx.reason)]
    diff = float(np.max(np.abs(approx.profile.first_thresholds() - result.first_thresholds)))
    return [CheckRow("asymptotic", -1, diff, diff <= ASYMPTOTIC_TOL, approx.branch)]


def last_lock_suite(result: EquilibriumResult, cfg: GameConfig, segments=12):
    """Enumerated best response on the last lock against its recursion threshold."""
    rows = []
    T, nu = cfg.horizon, cfg.cost_factor
    for i, cv in enumerate(result.continuation):
        if cfg.M < 2:
            continue
        h = SampledFunction(0.0, T, np.full(cv.grid_size, cfg.rewards[i][-1]))
        problem = oracle.StageProblem(h, nu, 0.0, T, cfg.rates[i])
        best = oracle.exhaustive_bang_bang_best_response(problem, segments)
        miss = abs(oracle.cut_time(best, problem) - cv.threshold(cfg.M))
        rows.append(CheckRow("last_lock", i, miss, best.is_threshold and miss <= T / segments))
    return rows
