"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed at the end."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, flat_config, steep_config
from lockrace import checks
from lockrace.equilibrium import (
    asymptotic_equilibrium,
    gamma_derivative,
    gamma_first_lock,
    solve_equilibrium,
    verify_equilibrium,
)
from lockrace.model import GameConfig, StrategyProfile
from lockrace.recursion import quadrature_check
from lockrace.simulator import estimate_acceleration, estimate_payoffs


def record(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def test_criterion_1_flat_reproduction():
    started = time.perf_counter()
    worst, problems = 0.0, []
    for nu in np.linspace(0.3, 2.0, 18):
        cfg = flat_config(nu)
        result = solve_equilibrium(cfg, raise_on_failure=False)
        theta = result.profile.as_array()
        approx = asymptotic_equilibrium(cfg).profile.first_thresholds()
        worst = max(worst, float(np.max(np.abs(theta[:, 0] - approx))))
        if not result.converged:
            problems.append(f"nu={nu:.3f} not converged")
        if not np.all(theta[:, 1:] == 8.0):
            problems.append(f"nu={nu:.3f} later thresholds {theta[0, 1:]}")
    elapsed = time.perf_counter() - started
    ok = not problems and worst <= 0.05 and elapsed <= 10.0
    record(1, ok, f"max |dtheta_1| = {worst:.4f} (<= 0.05), {elapsed:.2f}s (<= 10s) {problems}")


def test_criterion_2_steep_qualitative():
    started = time.perf_counter()
    nus = np.linspace(0.5, 4.5, 41)
    table = np.array([solve_equilibrium(steep_config(nu)).profile.as_array()[0] for nu in nus])
    elapsed = time.perf_counter() - started
    monotone = bool(np.all(np.diff(table, axis=0) <= 1e-9))
    only4 = (table[:, 3] == 0) & np.all(table[:, :3] > 0, axis=1)
    only34 = (table[:, 2] == 0) & np.all(table[:, :2] > 0, axis=1)
    ordered = only4.any() and only34.any() and nus[only4].min() < nus[only34].min()
    ok = monotone and ordered and elapsed <= 10.0
    detail = (f"non-increasing={monotone}, theta_4=0 alone from nu={nus[only4].min():.2f}, "
              f"theta_3=0 from nu={nus[only34].min():.2f}, {elapsed:.2f}s")
    record(2, ok, detail)


def test_criterion_3_single_lock_exact():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 7))
        beta = rng.uniform(0.5, 2.0)
        c1 = rng.uniform(1.0, 5.0)
        nu = rng.uniform(0.1, 0.95) * c1
        exact = -np.log(nu / c1) / ((n - 1) * beta)
        cfg = GameConfig.symmetric(n, [c1], horizon=exact + rng.uniform(0.5, 5.0),
                                   cost_factor=nu, rate=beta)
        theta = solve_equilibrium(cfg).first_thresholds
        worst = max(worst, float(np.max(np.abs(theta - exact))))
    record(3, worst <= 1e-6, f"max error {worst:.2e} (<= 1e-6) over 20 configs")


def test_criterion_4_nash_certification(flat, steep, flat_solved, steep_solved):
    gaps, monotone, notes = [], True, []
    for name, cfg, result in (("flat", flat, flat_solved), ("steep", steep, steep_solved)):
        reports = verify_equilibrium(result, cfg, candidates=400)
        gaps.append(max(r.gap for r in reports))
        first = result.first_thresholds
        for i in range(cfg.n):
            cv = result.continuation[i]
            deriv = np.array([gamma_derivative(th, i, first, cv, cfg)
                              for th in reports[i].candidates])
            rising = int(np.count_nonzero(np.diff(deriv) >= 0))
            if rising:
                monotone = False
                notes.append(f"{name} player {i + 1}: {rising}/{deriv.size - 1} non-decreasing steps")
    gap = max(gaps)
    detail = f"max gap {gap:.2e} (<= 1e-6); derivative strictly decreasing={monotone} {notes[:2]}"
    record(4, gap <= 1e-6 and monotone, detail)


def test_criterion_5_monte_carlo(flat, flat_solved):
    started = time.perf_counter()
    first = flat_solved.first_thresholds
    exact = np.array([
        gamma_first_lock(first[i], i, first, flat_solved.continuation[i], flat)
        for i in range(flat.n)
    ])
    est = estimate_payoffs(flat_solved.profile, flat, 100_000, seed=7)
    z_payoff = float(np.max(np.abs(est.mean - exact) / est.stderr))

    nu, beta, T = 1.3, 1.0, 2.0
    solo = GameConfig.symmetric(1, [1.0], horizon=T, cost_factor=nu, rate=beta)
    acc = estimate_acceleration(StrategyProfile.constant(solo, T), solo, 100_000, seed=7)
    cost, cost_se = nu * acc.mean[0], nu * acc.stderr[0]
    z_cost = abs(cost - nu * (1 - np.exp(-beta * T))) / cost_se
    elapsed = time.perf_counter() - started
    ok = z_payoff <= 3.0 and z_cost <= 4.0 and elapsed <= 30.0
    record(5, ok, f"payoff z={z_payoff:.2f} (<= 3), cost z={z_cost:.2f} (<= 4), {elapsed:.2f}s")


def test_criterion_6_structural():
    started = time.perf_counter()
    parts = {
        "lemma3": checks.lemma3_case(0, 100),
        "bangbang": checks.bangbang_case(0, 50, 12),
        "lemma1": checks.lemma1_case(0, 100),
        "suffix": checks.suffix_case(0, 20, 12),
    }
    elapsed = time.perf_counter() - started
    summary = {k: all(r.passed for r in rows) for k, rows in parts.items()}
    ok = all(summary.values()) and elapsed <= 60.0
    record(6, ok, f"{summary}, {elapsed:.2f}s (<= 60s)")


def test_criterion_7_recursion_integrity(flat, steep, flat_solved, steep_solved):
    residual = max(
        quadrature_check(result.continuation[i], cfg, i)
        for cfg, result in ((flat, flat_solved), (steep, steep_solved))
        for i in range(cfg.n)
    )
    shift = []
    for cfg in (flat, steep):
        coarse = solve_equilibrium(cfg, grid_size=1001)
        fine = solve_equilibrium(cfg, grid_size=2001)
        spacing = cfg.horizon / 1000
        shift.append(float(np.max(np.abs(coarse.profile.as_array() - fine.profile.as_array())))
                     / spacing)
    ok = residual < 1e-6 and max(shift) < 1.0
    record(7, ok, f"quadrature residual {residual:.2e} (< 1e-6); "
                  f"grid-doubling shift {max(shift):.3f} coarse spacings (< 1)")
