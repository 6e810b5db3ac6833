import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lockrace.model import GameConfig, SampledFunction
from lockrace.recursion import (
    backward_recursion,
    continuation_csv,
    quadrature_check,
    stage_values,
    terminal_stage,
    threshold_root,
)


def erlang_continuation(t, rewards, nu, beta, T, k):
    """Value from lock k onward when every later lock is worth chasing until T.

    Lock l is acquired iff l - k + 1 exponential clocks ring before T - t,
    and each acquisition nets ``c_l - nu`` in expectation.
    """
    total = np.zeros_like(t)
    for l in range(k, len(rewards) + 1):
        total += (rewards[l - 1] - nu) * stats.gamma.cdf(beta * (T - t), a=l - k + 1)
    return total


@pytest.mark.parametrize("nu", [0.3, 1.0, 2.5])
def test_all_active_matches_erlang_sum(nu):
    cfg = GameConfig.symmetric(4, [1, 3, 3, 3, 3], horizon=8.0, cost_factor=nu)
    cv = backward_recursion(cfg, 0)
    assert cv.thresholds == (8.0, 8.0, 8.0, 8.0)
    t = cv.upsilon2.grid
    for k in range(2, 6):
        expected = erlang_continuation(t, cfg.rewards[0], nu, 1.0, 8.0, k)
        assert np.max(np.abs(cv.curve(k).values - expected)) < 1e-5


def test_terminal_stage_closed_form():
    cfg = GameConfig.symmetric(2, [1.0, 4.0], horizon=6.0, cost_factor=1.5, rate=0.7)
    theta, curve = terminal_stage(cfg, 0)
    assert theta == 6.0
    t = curve.grid
    np.testing.assert_allclose(curve.values, 2.5 * (1 - np.exp(-0.7 * (6.0 - t))), atol=1e-12)


def test_terminal_stage_not_worth_it():
    cfg = GameConfig.symmetric(2, [1.0, 1.0], horizon=6.0, cost_factor=1.5)
    theta, curve = terminal_stage(cfg, 0)
    assert theta == 0.0
    assert np.all(curve.values == 0.0)


def test_threshold_root_exact_crossing():
    # 1 + 2 (1 - e^{-(T - t)}) falls to nu = 1.5 at t = 8 - ln(4/3)
    upsilon = SampledFunction.from_callable(lambda t: 2 * (1 - np.exp(-(8.0 - t))), 0.0, 8.0, 4001)
    root = threshold_root(upsilon, 1.0, 1.5, 8.0)
    assert abs(root - (8.0 - np.log(4 / 3))) < 1e-5


def test_threshold_root_edges():
    zero = SampledFunction.zeros(0.0, 3.0, 11)
    assert threshold_root(zero, 2.0, 1.0, 3.0) == 3.0
    assert threshold_root(zero, 0.5, 1.0, 3.0) == 0.0
    # a tie at the start counts as not worth chasing
    assert threshold_root(zero, 1.0, 1.0, 3.0) == 0.0


def test_decreasing_rewards_thresholds_are_extreme(steep):
    cv = backward_recursion(steep, 0)
    assert cv.thresholds == (5.0, 5.0, 0.0)


def test_tie_is_recorded():
    cfg = GameConfig.symmetric(2, [4, 3, 2, 1], horizon=5.0, cost_factor=1.0)
    cv = backward_recursion(cfg, 0)
    assert cv.threshold(4) == 0.0
    assert 4 in cv.boundary_ties


def test_quadrature_check_small(flat, steep):
    for cfg in (flat, steep):
        cv = backward_recursion(cfg, 0)
        assert quadrature_check(cv, cfg, 0) < 1e-9


def test_quadrature_check_detects_corruption(flat):
    cv = backward_recursion(flat, 0)
    bad = SampledFunction(0.0, 8.0, cv.curve(3).values + 0.01)
    corrupted = type(cv)(cv.player, cv.thresholds, (cv.curves[0], bad, *cv.curves[2:]),
                         cv.horizon, cv.grid_size)
    assert quadrature_check(corrupted, flat, 0) > 1e-3


def test_single_lock_has_no_curves():
    cfg = GameConfig.symmetric(3, [2.0], horizon=4.0, cost_factor=1.0)
    cv = backward_recursion(cfg, 0)
    assert cv.curves == ()
    assert np.all(cv.upsilon2.values == 0.0)
    assert quadrature_check(cv, cfg, 0) == 0.0


def test_grid_refinement_converges(flat):
    reference = backward_recursion(flat, 0, grid_size=3201).upsilon2
    errors = []
    for size in (401, 801):
        curve = backward_recursion(flat, 0, grid_size=size).upsilon2
        errors.append(np.max(np.abs(curve.values - reference(curve.grid))))
    assert errors[0] < 1e-4
    # at least second order: halving the spacing cuts the error by about 4
    assert errors[1] < errors[0] / 3


def test_csv_layout(steep):
    text = continuation_csv([backward_recursion(steep, 0, grid_size=11)])
    curves, thresholds = text.strip().split("\n\n")
    assert curves.splitlines()[0] == "player,k,t,upsilon"
    assert len(curves.splitlines()) == 1 + 3 * 11
    assert thresholds.splitlines() == ["player,k,threshold", "1,2,5.0", "1,3,5.0", "1,4,0.0"]


rewards_st = st.lists(st.floats(0.0, 5.0), min_size=2, max_size=5)


@settings(max_examples=25, deadline=None)
@given(rewards=rewards_st, nu=st.floats(0.1, 3.0), beta=st.floats(0.3, 2.0),
       T=st.floats(0.5, 8.0))
def test_values_nonnegative_and_zero_after_threshold(rewards, nu, beta, T):
    cfg = GameConfig.symmetric(2, rewards, horizon=T, cost_factor=nu, rate=beta)
    cv = backward_recursion(cfg, 0, grid_size=201)
    for k in range(2, cfg.M + 1):
        curve = cv.curve(k)
        assert np.all(curve.values >= -1e-12)
        after = curve.grid >= cv.threshold(k)
        assert np.all(curve.values[after] == 0.0)
        assert curve.values[-1] == 0.0


@settings(max_examples=25, deadline=None)
@given(rewards=rewards_st, nu=st.floats(0.1, 3.0), T=st.floats(0.5, 6.0),
       fractions=st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
def test_recursion_thresholds_beat_arbitrary_ones(rewards, nu, T, fractions):
    """Any other choice of later-lock thresholds gives a value no larger at t = 0."""
    cfg = GameConfig.symmetric(2, rewards, horizon=T, cost_factor=nu)
    best = backward_recursion(cfg, 0, grid_size=401)
    other = stage_values(cfg, 0, [f * T for f in fractions[: cfg.M - 1]], grid_size=401)
    assert other[0].values[0] <= best.upsilon2.values[0] + 1e-9
