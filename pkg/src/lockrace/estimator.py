"""scikit-learn style front end for the equilibrium solver and the simulator."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .equilibrium import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    solve_equilibrium,
    verify_equilibrium,
)
from .model import DEFAULT_GRID_SIZE, GameConfig, StrategyProfile, check_config
from .simulator import estimate_payoffs


def check_game(game) -> GameConfig:
    """Coerce a config, a JSON-like dict or a path to a validated ``GameConfig``."""
    if isinstance(game, GameConfig):
        return check_config(game)
    if isinstance(game, dict):
        return GameConfig.from_dict(game)
    if isinstance(game, (str, Path)):
        return GameConfig.load(game)
    raise TypeError(f"cannot interpret {type(game).__name__} as a game configuration")


def check_profile(profile, cfg: GameConfig) -> StrategyProfile:
    if not isinstance(profile, StrategyProfile):
        profile = StrategyProfile.from_array(np.asarray(profile, dtype=float))
    problems = profile.validate(cfg)
    if problems:
        raise ValueError("; ".join(problems))
    return profile


class MTEquilibrium(BaseEstimator):
    """Fit the unique M-threshold Nash equilibrium of a game.

    Parameters
    ----------
    grid_size : int
        Points of the uniform time grid carrying the continuation values.
    tol : float
        Stop when no first-lock threshold moves by more than this in a sweep.
    max_iter : int
        Cap on best-response sweeps.

    Attributes
    ----------
    thresholds_ : ndarray of shape (n_players, n_locks)
    result_ : EquilibriumResult
    n_iter_ : int
    """

    def __init__(self, grid_size=DEFAULT_GRID_SIZE, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
        self.grid_size = grid_size
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        cfg = check_game(X)
        self.config_ = cfg
        self.result_ = solve_equilibrium(cfg, self.grid_size, self.tol, self.max_iter)
        self.thresholds_ = self.result_.profile.as_array()
        self.continuation_ = self.result_.continuation
        self.n_iter_ = self.result_.iterations
        self.n_players_, self.n_locks_ = self.thresholds_.shape
        return self

    def predict(self, X, lock=1):
        """Contact rate each player uses on ``lock`` at times ``X`` (attempt begun at 0)."""
        check_is_fitted(self, "thresholds_")
        t = np.asarray(X, dtype=float).reshape(-1)
        theta = self.thresholds_[:, lock - 1]
        rates = np.asarray(self.config_.rates)
        return np.where(t[:, None] <= theta[None, :], rates[None, :], 0.0)

    def score(self, X=None, y=None, candidates=200):
        """Minus the largest gain any player gets from a unilateral lock-1 deviation."""
        check_is_fitted(self, "result_")
        cfg = self.config_ if X is None else check_game(X)
        reports = verify_equilibrium(self.result_, cfg, candidates)
        return -max(r.gap for r in reports)


class PayoffSimulator(BaseEstimator):
    """Monte Carlo payoff estimates for a fixed strategy profile."""

    def __init__(self, episodes=100_000, seed=0):
        self.episodes = episodes
        self.seed = seed

    def fit(self, X, profile=None):
        cfg = check_game(X)
        if profile is None:
            profile = MTEquilibrium().fit(cfg).result_.profile
        self.profile_ = check_profile(profile, cfg)
        est = estimate_payoffs(self.profile_, cfg, self.episodes, self.seed)
        self.estimate_ = est
        self.mean_ = est.mean
        self.stderr_ = est.stderr
        return self
