"""Game primitives: configuration, threshold strategies and grid functions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_GRID_SIZE = 2001

# slack allowed when evaluating a grid function right at its domain ends
_DOMAIN_EPS = 1e-12


class ConfigError(ValueError):
    """Raised when a game configuration violates its invariants."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class GameConfig:
    """Primitives of the M-lock, n-player acquisition race.

    ``rates[i]`` is the maximal contact rate of player ``i`` and
    ``rewards[i][k]`` the reward for lock ``k + 1``.  Acceleration is charged
    at ``cost_factor`` per unit of accumulated rate.
    """

    horizon: float
    cost_factor: float
    rates: tuple
    rewards: tuple

    def __post_init__(self):
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "cost_factor", float(self.cost_factor))
        object.__setattr__(self, "rates", tuple(float(b) for b in self.rates))
        object.__setattr__(
            self, "rewards", tuple(tuple(float(c) for c in row) for row in self.rewards)
        )

    @property
    def n(self) -> int:
        return len(self.rates)

    @property
    def M(self) -> int:
        return len(self.rewards[0]) if self.rewards else 0

    @classmethod
    def symmetric(cls, n, rewards, *, horizon, cost_factor, rate=1.0) -> "GameConfig":
        return cls(
            horizon=horizon,
            cost_factor=cost_factor,
            rates=(rate,) * n,
            rewards=(tuple(rewards),) * n,
        )

    def with_cost_factor(self, nu: float) -> "GameConfig":
        return GameConfig(self.horizon, nu, self.rates, self.rewards)

    def permuted(self, order: Sequence[int]) -> "GameConfig":
        return GameConfig(
            self.horizon,
            self.cost_factor,
            tuple(self.rates[j] for j in order),
            tuple(self.rewards[j] for j in order),
        )

    def is_symmetric(self) -> bool:
        return len(set(self.rates)) <= 1 and len(set(self.rewards)) <= 1

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "cost_factor": self.cost_factor,
            "players": [
                {"rate": b, "rewards": list(c)} for b, c in zip(self.rates, self.rewards)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GameConfig":
        problems = []
        if not isinstance(doc, dict):
            raise ConfigError(["config document must be a JSON object"])
        for key in ("horizon", "cost_factor", "players"):
            if key not in doc:
                problems.append(f"missing key {key!r}")
        if problems:
            raise ConfigError(problems)
        players = doc["players"]
        if not isinstance(players, list) or not players:
            raise ConfigError(["players must be a non-empty list"])
        rates, rewards = [], []
        for j, p in enumerate(players):
            if not isinstance(p, dict) or "rate" not in p or "rewards" not in p:
                raise ConfigError([f"player {j} needs 'rate' and 'rewards'"])
            rates.append(p["rate"])
            rewards.append(p["rewards"])
        lengths = {len(r) for r in rewards}
        if len(lengths) > 1:
            raise ConfigError(["rewards length mismatch across players"])
        try:
            cfg = cls(
                horizon=float(doc["horizon"]),
                cost_factor=float(doc["cost_factor"]),
                rates=rates,
                rewards=rewards,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError([f"non-numeric config value: {exc}"]) from exc
        problems = validate_config(cfg)
        if problems:
            raise ConfigError(problems)
        return cfg

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "GameConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "GameConfig":
        return cls.from_json(Path(path).read_text())


def validate_config(cfg: GameConfig, M: int | None = None) -> list[str]:
    """Return every violated invariant of ``cfg`` (empty when valid).

    ``M`` optionally fixes the expected number of locks; otherwise it is taken
    from the first player's reward vector.
    """
    problems = []
    if cfg.n < 1:
        problems.append("at least one player is required")
    if len(cfg.rewards) != cfg.n:
        problems.append("one reward vector per player is required")
    expected = M if M is not None else cfg.M
    if expected < 1:
        problems.append("at least one lock is required")
    if any(len(row) != expected for row in cfg.rewards):
        problems.append("rewards length mismatch")
    if not (math.isfinite(cfg.horizon) and cfg.horizon > 0):
        problems.append("horizon must be positive")
    if not (math.isfinite(cfg.cost_factor) and cfg.cost_factor > 0):
        problems.append("cost_factor must be positive")
    if any(not (math.isfinite(b) and b > 0) for b in cfg.rates):
        problems.append("rates must be positive")
    if any(not (math.isfinite(c) and c >= 0) for row in cfg.rewards for c in row):
        problems.append("rewards must be non-negative")
    return problems


def check_config(cfg: GameConfig) -> GameConfig:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


@dataclass(frozen=True)
class ThresholdPolicy:
    """Rate ``rate`` on ``[start, threshold]``, zero elsewhere."""

    threshold: float
    start: float = 0.0
    rate: float = 1.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        on = (t >= self.start) & (t <= self.threshold)
        return np.where(on, self.rate, 0.0)

    def accumulated(self, t):
        t = np.asarray(t, dtype=float)
        return self.rate * np.clip(np.minimum(t, self.threshold) - self.start, 0.0, None)


@dataclass(frozen=True)
class MTStrategy:
    thresholds: tuple

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(x) for x in self.thresholds))

    def __len__(self):
        return len(self.thresholds)

    def __getitem__(self, k):
        return self.thresholds[k]

    def policy(self, k: int, start: float, rate: float) -> ThresholdPolicy:
        """Threshold policy for lock ``k`` (1-based) started at ``start``."""
        return ThresholdPolicy(self.thresholds[k - 1], start, rate)


@dataclass(frozen=True)
class StrategyProfile:
    strategies: tuple

    def __post_init__(self):
        object.__setattr__(
            self,
            "strategies",
            tuple(s if isinstance(s, MTStrategy) else MTStrategy(s) for s in self.strategies),
        )

    @classmethod
    def from_array(cls, thresholds) -> "StrategyProfile":
        return cls(tuple(MTStrategy(row) for row in np.atleast_2d(thresholds)))

    @classmethod
    def constant(cls, cfg: GameConfig, value: float) -> "StrategyProfile":
        return cls.from_array(np.full((cfg.n, cfg.M), float(value)))

    def __len__(self):
        return len(self.strategies)

    def __getitem__(self, i) -> MTStrategy:
        return self.strategies[i]

    def as_array(self) -> np.ndarray:
        return np.array([s.thresholds for s in self.strategies], dtype=float)

    def first_thresholds(self) -> np.ndarray:
        return np.array([s.thresholds[0] for s in self.strategies], dtype=float)

    def validate(self, cfg: GameConfig) -> list[str]:
        problems = []
        if len(self.strategies) != cfg.n:
            problems.append(f"profile has {len(self.strategies)} players, config has {cfg.n}")
        for j, s in enumerate(self.strategies):
            if len(s) != cfg.M:
                problems.append(f"player {j} has {len(s)} thresholds, expected {cfg.M}")
            if any(not (0.0 <= x <= cfg.horizon) for x in s.thresholds):
                problems.append(f"player {j} thresholds outside [0, T]")
        return problems


@dataclass(frozen=True)
class SampledFunction:
    """Values on a uniform grid over ``[t_lo, t_hi]``, linearly interpolated."""

    t_lo: float
    t_hi: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a sampled function needs at least two values")
        if not self.t_hi > self.t_lo:
            raise ValueError("empty domain")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, fn, t_lo, t_hi, grid_size=DEFAULT_GRID_SIZE) -> "SampledFunction":
        grid = uniform_grid(t_lo, t_hi, grid_size)
        return cls(t_lo, t_hi, np.asarray(fn(grid), dtype=float) * np.ones_like(grid))

    @classmethod
    def zeros(cls, t_lo, t_hi, grid_size=DEFAULT_GRID_SIZE) -> "SampledFunction":
        return cls(t_lo, t_hi, np.zeros(grid_size))

    @property
    def grid_size(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> float:
        return (self.t_hi - self.t_lo) / (self.grid_size - 1)

    @property
    def grid(self) -> np.ndarray:
        return uniform_grid(self.t_lo, self.t_hi, self.grid_size)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_lo - _DOMAIN_EPS) or np.any(t > self.t_hi + _DOMAIN_EPS):
            raise ValueError(f"evaluation outside [{self.t_lo}, {self.t_hi}]")
        out = np.interp(t, self.grid, self.values)
        return float(out) if out.ndim == 0 else out


def uniform_grid(t_lo: float, t_hi: float, size: int) -> np.ndarray:
    grid = t_lo + (t_hi - t_lo) * np.arange(size) / (size - 1)
    grid[-1] = t_hi
    return grid


@dataclass
class PlayerState:
    """Information state of one player: still in the race, and last contact."""

    active: bool = True
    last_contact: float | None = None


def eta_first_lock(t, i: int, first_thresholds, rates, horizon: float | None = None):
    """Probability that no opponent of player ``i`` has contacted lock 1 by ``t``.

    ``first_thresholds`` and ``rates`` are per-player arrays; player ``i`` is
    excluded from the sum.  Accepts scalar or array ``t``.
    """
    t = np.asarray(t, dtype=float)
    if horizon is not None and (np.any(t < 0) or np.any(t > horizon + _DOMAIN_EPS)):
        raise ValueError("t outside [0, T]")
    theta = np.delete(np.asarray(first_thresholds, dtype=float), i)
    beta = np.delete(np.asarray(rates, dtype=float), i)
    if theta.size == 0:
        out = np.ones_like(t)
    else:
        exposure = np.minimum(t[..., None], theta) @ beta
        out = np.exp(-exposure)
    return float(out) if out.ndim == 0 else out


def eta_for_profile(t, i: int, profile: StrategyProfile, cfg: GameConfig):
    return eta_first_lock(t, i, profile.first_thresholds(), cfg.rates, cfg.horizon)
