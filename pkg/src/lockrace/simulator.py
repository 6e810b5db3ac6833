"""Monte Carlo simulation of the acquisition race under MT strategies.

Every player runs a Poisson clock at full rate until its current threshold.
The first valid contact on lock 1 wins it; losers learn this at their own
contact and stop.  The winner then works through locks 2..M alone.
Acceleration is charged at ``nu * rate`` per unit of time actually spent
chasing a lock.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import (
    GameConfig,
    PlayerState,
    SampledFunction,
    StrategyProfile,
    ThresholdPolicy,
    uniform_grid,
)

log = logging.getLogger(__name__)

CHUNK = 8192

# why a player stopped chasing locks
STOP_LOST = "lost"            # contacted lock 1, but an opponent was earlier
STOP_THRESHOLD = "threshold"  # threshold passed before the next contact
STOP_COMPLETED = "completed"  # acquired every lock
_REASONS = (STOP_LOST, STOP_THRESHOLD, STOP_COMPLETED)


@dataclass(frozen=True)
class EpisodeOutcome:
    payoff: np.ndarray
    acceleration: np.ndarray
    locks_acquired: np.ndarray
    first_contact: np.ndarray  # nan when the player never contacted lock 1
    stop_reason: tuple
    states: tuple = field(default=())

    @property
    def winner(self) -> int | None:
        won = np.flatnonzero(self.locks_acquired > 0)
        return int(won[0]) if won.size else None


@dataclass(frozen=True)
class PayoffEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    episodes: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "seed": self.seed,
            "players": [
                {"mean": float(m), "stderr": float(s)} for m, s in zip(self.mean, self.stderr)
            ],
        }


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based stream for one block of ``CHUNK`` consecutive episodes."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))


def _draw(rng, episodes, n, M):
    return rng.standard_exponential((episodes, n, M))


def _race(thresholds, cfg: GameConfig, unit_exp):
    """Vectorised race over a batch of episodes.

    ``thresholds`` is ``(n, M)``, ``unit_exp`` is ``(episodes, n, M)`` standard
    exponentials.  Returns payoff, acceleration, locks acquired, lock-1
    contact time and stop-reason codes, each ``(episodes, n)``.
    """
    theta = np.asarray(thresholds, dtype=float)
    beta = np.asarray(cfg.rates)
    rewards = np.asarray(cfg.rewards)
    nu, T = cfg.cost_factor, cfg.horizon
    E = unit_exp / beta[None, :, None]
    episodes, n, M = E.shape

    th1 = np.minimum(theta[:, 0], T)
    raw1 = E[:, :, 0]
    valid1 = raw1 <= th1
    acc = beta * np.minimum(raw1, th1)
    first_contact = np.where(valid1, raw1, np.nan)

    contact = np.where(valid1, raw1, np.inf)
    winner = np.argmin(contact, axis=1)
    has_winner = np.isfinite(contact[np.arange(episodes), winner])
    if n > 1 and has_winner.any():
        srt = np.sort(contact, axis=1)
        ties = has_winner & (srt[:, 0] == srt[:, 1])
        if ties.any():
            log.warning("%d simultaneous lock-1 contacts; lowest index wins", int(ties.sum()))

    rows = np.flatnonzero(has_winner)
    who = winner[rows]
    acquired = np.zeros((episodes, n), dtype=int)
    reward = np.zeros((episodes, n))
    acquired[rows, who] = 1
    reward[rows, who] = rewards[who, 0]

    reason = np.where(valid1, 0, 1)  # lost / threshold
    reason[rows, who] = 2
    # winners proceed alone through locks 2..M
    tau = contact[rows, who]
    alive = np.ones(rows.size, dtype=bool)
    w_acc = np.zeros(rows.size)
    w_reward = np.zeros(rows.size)
    w_locks = np.ones(rows.size, dtype=int)
    for k in range(1, M):
        th = np.minimum(theta[who, k], T)
        starts = alive & (tau < th)
        nxt = tau + E[rows, who, k]
        spent = np.where(starts, np.minimum(nxt, th) - tau, 0.0)
        w_acc += beta[who] * spent
        hit = starts & (nxt <= th)
        w_reward += np.where(hit, rewards[who, k], 0.0)
        w_locks += hit
        alive = hit
        tau = np.where(hit, nxt, tau)
    acc[rows, who] += w_acc
    reward[rows, who] += w_reward
    acquired[rows, who] = w_locks
    reason[rows, who] = np.where(w_locks == M, 2, 1)

    payoff = reward - nu * acc
    return payoff, acc, acquired, first_contact, reason


def _thresholds(profile, cfg):
    arr = profile.as_array() if isinstance(profile, StrategyProfile) else np.asarray(profile)
    if arr.shape != (cfg.n, cfg.M):
        raise ValueError(f"profile shape {arr.shape} does not match ({cfg.n}, {cfg.M})")
    return arr


def simulate_episode(profile, cfg: GameConfig, rng: np.random.Generator) -> EpisodeOutcome:
    theta = _thresholds(profile, cfg)
    payoff, acc, acquired, first, reason = _race(theta, cfg, _draw(rng, 1, cfg.n, cfg.M))
    states = tuple(
        PlayerState(active=bool(reason[0, i] == 2),
                    last_contact=None if np.isnan(first[0, i]) else float(first[0, i]))
        for i in range(cfg.n)
    )
    return EpisodeOutcome(
        payoff[0], acc[0], acquired[0], first[0],
        tuple(_REASONS[r] for r in reason[0]), states,
    )


def _iter_chunks(episodes, seed, n, M):
    done = 0
    chunk = 0
    while done < episodes:
        size = min(CHUNK, episodes - done)
        # always draw a full chunk so episode j's numbers never depend on the total
        yield _draw(chunk_rng(seed, chunk), CHUNK, n, M)[:size]
        done += size
        chunk += 1


def simulate_batch(profile, cfg: GameConfig, episodes: int, seed: int):
    """Per-episode arrays (payoff, acceleration, locks, lock-1 contact, reason)."""
    theta = _thresholds(profile, cfg)
    parts = [_race(theta, cfg, U) for U in _iter_chunks(episodes, seed, cfg.n, cfg.M)]
    return tuple(np.concatenate(p, axis=0) for p in zip(*parts))


def _estimate(samples, seed) -> PayoffEstimate:
    episodes = samples.shape[0]
    mean = samples.mean(axis=0)
    if episodes > 1:
        se = samples.std(axis=0, ddof=1) / np.sqrt(episodes)
    else:
        se = np.zeros_like(mean)
    return PayoffEstimate(mean, se, episodes, seed)


def estimate_payoffs(profile, cfg: GameConfig, episodes: int, seed: int) -> PayoffEstimate:
    if episodes < 1:
        raise ValueError("episodes must be positive")
    payoff = simulate_batch(profile, cfg, episodes, seed)[0]
    return _estimate(payoff, seed)


def estimate_acceleration(profile, cfg: GameConfig, episodes: int, seed: int) -> PayoffEstimate:
    """Mean accumulated acceleration per player (cost divided by ``nu``)."""
    acc = simulate_batch(profile, cfg, episodes, seed)[1]
    return _estimate(acc, seed)


@dataclass(frozen=True)
class DeviationEstimate:
    """Monte Carlo payoff of ``player`` at each candidate lock-1 threshold.

    ``diff_mean``/``diff_stderr`` are paired against the unmodified profile
    under common random numbers.
    """

    player: int
    candidates: np.ndarray
    estimates: tuple
    diff_mean: np.ndarray
    diff_stderr: np.ndarray


def deviation_test_mc(profile, cfg: GameConfig, player: int, candidate_thetas,
                      episodes: int, seed: int) -> DeviationEstimate:
    """Payoffs when ``player`` alone moves its lock-1 threshold, same randomness throughout."""
    base = _thresholds(profile, cfg).copy()
    candidates = np.asarray(candidate_thetas, dtype=float)
    if np.any(candidates < 0) or np.any(candidates > cfg.horizon):
        raise ValueError("candidate thresholds must lie in [0, T]")
    draws = list(_iter_chunks(episodes, seed, cfg.n, cfg.M))
    reference = np.concatenate([_race(base, cfg, U)[0][:, player] for U in draws])
    estimates, dmean, dse = [], [], []
    for theta in candidates:
        trial = base.copy()
        trial[player, 0] = theta
        payoff = np.concatenate([_race(trial, cfg, U)[0] for U in draws])
        estimates.append(_estimate(payoff, seed))
        diff = payoff[:, player] - reference
        dmean.append(diff.mean())
        dse.append(diff.std(ddof=1) / np.sqrt(episodes) if episodes > 1 else 0.0)
    return DeviationEstimate(player, candidates, tuple(estimates), np.array(dmean), np.array(dse))


def contact_times(policy, T: float, episodes: int, seed: int) -> np.ndarray:
    """Contact epochs under an open-loop rate function; ``inf`` when none by ``T``.

    ``policy`` is a ``ThresholdPolicy`` or anything with ``accumulated(t)`` and
    ``inverse_accumulated(x)`` (the oracle's piecewise-constant controls).
    """
    rng = chunk_rng(seed, 0)
    mass = rng.standard_exponential(episodes)
    if isinstance(policy, ThresholdPolicy):
        total = float(policy.accumulated(T))
        rate = policy.rate
        times = policy.start + mass / rate if rate > 0 else np.full(episodes, np.inf)
    else:
        total = float(policy.accumulated(T))
        times = np.where(mass <= total, policy.inverse_accumulated(np.minimum(mass, total)),
                         np.inf)
    return np.where(mass <= total, times, np.inf)


def empirical_cdf_first_contact(policy, T: float, episodes: int, seed: int,
                                grid_size: int = 201) -> SampledFunction:
    times = np.sort(contact_times(policy, T, episodes, seed))
    grid = uniform_grid(0.0, T, grid_size)
    counts = np.searchsorted(times, grid, side="right")
    return SampledFunction(0.0, T, counts / episodes)


def dump_episodes(batch, stream):
    """Write (episode, player, payoff, stage_reached, tau_1) rows; players 1-based."""
    payoff, _, acquired, first, _ = batch
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["episode", "player", "payoff", "stage_reached", "tau_1"])
    for ep in range(payoff.shape[0]):
        for i in range(payoff.shape[1]):
            tau = "" if np.isnan(first[ep, i]) else repr(float(first[ep, i]))
            writer.writerow([ep, i + 1, repr(float(payoff[ep, i])), int(acquired[ep, i]), tau])
