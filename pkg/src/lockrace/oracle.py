"""Discretised open-loop controls for checking the best-response structure.

A stage of the game is the control problem

    J(s, x0, a) = int_s^T (h(t) - nu x(t)) a(t) e^{-x(t)} dt - nu x(T) e^{-x(T)},
    x' = a, x(s) = x0, 0 <= a <= beta,

where ``h`` is the gain from a contact at ``t``.  Controls here are piecewise
constant on a uniform segmentation, which makes the state exactly piecewise
linear and small bang-bang families exhaustively searchable.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .model import SampledFunction
from .quadrature import panel_breaks, simpson_nodes

log = logging.getLogger(__name__)

MAX_SEGMENTS = 14
_LEVEL_EPS = 1e-12
# Simpson subintervals per unit of accumulated rate inside one panel
_SUB_DENSITY = 128


@dataclass(frozen=True)
class PiecewiseConstantControl:
    start: float
    end: float
    values: np.ndarray = field(repr=False)
    bound: float = 1.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("a control needs at least one segment")
        if np.any(values < -_LEVEL_EPS) or np.any(values > self.bound + _LEVEL_EPS):
            raise ValueError("control values must lie in [0, bound]")
        if not self.end > self.start:
            raise ValueError("empty control interval")
        values = np.clip(values, 0.0, self.bound)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def threshold(cls, start, end, theta, bound, segments) -> "PiecewiseConstantControl":
        """Rate ``bound`` until ``theta``, zero after, on ``segments`` equal pieces."""
        edges = np.linspace(start, end, segments + 1)
        covered = np.clip(theta - edges[:-1], 0.0, edges[1:] - edges[:-1])
        return cls(start, end, bound * covered / (edges[1:] - edges[:-1]), bound)

    @property
    def segments(self) -> int:
        return self.values.size

    @property
    def width(self) -> float:
        return (self.end - self.start) / self.segments

    @property
    def edges(self) -> np.ndarray:
        e = self.start + self.width * np.arange(self.segments + 1)
        e[-1] = self.end
        return e

    def _segment_index(self, t):
        j = np.floor((np.asarray(t, dtype=float) - self.start) / self.width).astype(int)
        return np.clip(j, 0, self.segments - 1)

    def __call__(self, t):
        return self.values[self._segment_index(t)]

    def _edge_mass(self):
        return np.concatenate([[0.0], np.cumsum(self.values * self.width)])

    def accumulated(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.start - 1e-12) or np.any(t > self.end + 1e-12):
            raise ValueError(f"t outside [{self.start}, {self.end}]")
        j = self._segment_index(t)
        out = self._edge_mass()[j] + self.values[j] * (t - self.edges[j])
        return float(out) if out.ndim == 0 else out

    def inverse_accumulated(self, x):
        """Earliest time at which the accumulated rate reaches ``x``."""
        x = np.asarray(x, dtype=float)
        mass = self._edge_mass()
        j = np.clip(np.searchsorted(mass, x, side="left") - 1, 0, self.segments - 1)
        rate = self.values[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = self.edges[j] + np.where(rate > 0, (x - mass[j]) / rate, 0.0)
        return float(t) if t.ndim == 0 else t

    def is_threshold_shaped(self) -> bool:
        """Full rate, then at most one partial segment, then zero."""
        v = self.values
        full = v >= self.bound - _LEVEL_EPS
        j = int(np.argmin(full)) if not full.all() else v.size
        return bool(np.all(v[j + 1:] <= _LEVEL_EPS))


@dataclass(frozen=True)
class StageProblem:
    h: SampledFunction
    nu: float
    start: float
    horizon: float
    beta: float

    def segment_control(self, pattern) -> PiecewiseConstantControl:
        return PiecewiseConstantControl(
            self.start, self.horizon, self.beta * np.asarray(pattern, dtype=float), self.beta
        )


def terminal_cost(x, nu):
    return -nu * x * np.exp(-x)


def _nodes(control: PiecewiseConstantControl, *kinks):
    breaks = panel_breaks(control.start, control.end, control.edges, *kinks)
    longest = float(np.max(np.diff(breaks)))
    rate = float(np.max(control.values)) if control.values.size else 0.0
    sub = 2 * int(math.ceil(0.5 * _SUB_DENSITY * rate * longest)) + 2
    nodes, weights = simpson_nodes(breaks, sub)
    # nodes on a segment edge belong to both neighbours; nudge inward for lookup
    mid = 0.5 * (breaks[:-1] + breaks[1:])
    panel = np.repeat(np.arange(mid.size), sub + 1)
    seg = control._segment_index(mid)[panel]
    return nodes, weights, seg


def _state(control, nodes, seg):
    return control._edge_mass()[seg] + control.values[seg] * (nodes - control.edges[seg])


def accumulated(control: PiecewiseConstantControl, t):
    return control.accumulated(t)


def success_probability(control: PiecewiseConstantControl, eta: SampledFunction) -> float:
    """Probability that the contact happens by ``end`` while opponents have not."""
    nodes, w, seg = _nodes(control, eta.grid)
    x = _state(control, nodes, seg)
    return float(np.dot(w, eta(nodes) * np.exp(-x) * control.values[seg]))


def expected_cost(control: PiecewiseConstantControl) -> float:
    """Expected accumulated rate up to the contact or the deadline."""
    nodes, w, seg = _nodes(control)
    x = _state(control, nodes, seg)
    total = control.accumulated(control.end)
    return float(total * math.exp(-total) + np.dot(w, x * np.exp(-x) * control.values[seg]))


def stage_objective(problem: StageProblem, control: PiecewiseConstantControl,
                    x0: float = 0.0) -> float:
    nodes, w, seg = _nodes(control, problem.h.grid)
    x = x0 + _state(control, nodes, seg)
    gain = (problem.h(nodes) - problem.nu * x) * control.values[seg] * np.exp(-x)
    return float(np.dot(w, gain) + terminal_cost(x0 + control.accumulated(control.end),
                                                 problem.nu))


def lemma3_residual(problem: StageProblem, control: PiecewiseConstantControl, x0: float) -> float:
    """|J(s, x0, a) - e^{-x0} (J(s, 0, a) - nu x0)|; the identity is exact."""
    lhs = stage_objective(problem, control, x0)
    rhs = math.exp(-x0) * (stage_objective(problem, control, 0.0) - problem.nu * x0)
    return abs(lhs - rhs)


class ShiftResult(NamedTuple):
    control: PiecewiseConstantControl
    already_threshold: bool


def mass_shift(control: PiecewiseConstantControl) -> ShiftResult:
    """Move rate from the latest busy segment into the earliest unsaturated one.

    Total accumulated rate is preserved and the accumulated rate never drops
    at any time.  Threshold-shaped inputs come back unchanged and flagged.
    """
    if control.is_threshold_shaped():
        return ShiftResult(control, True)
    v = control.values.copy()
    early = int(np.argmax(v < control.bound - _LEVEL_EPS))
    busy = np.flatnonzero(v[early + 1:] > _LEVEL_EPS)
    late = early + 1 + int(busy[-1])
    amount = min(control.bound - v[early], v[late])
    v[early] += amount
    v[late] -= amount
    return ShiftResult(PiecewiseConstantControl(control.start, control.end, v, control.bound),
                       False)


def threshold_rearrangement(control: PiecewiseConstantControl) -> PiecewiseConstantControl:
    """Repeat ``mass_shift`` until the control is threshold-shaped."""
    for _ in range(control.segments ** 2 + 1):
        control, done = mass_shift(control)
        if done:
            return control
    raise RuntimeError("mass shifting did not terminate")


class BangBangResult(NamedTuple):
    control: PiecewiseConstantControl
    value: float
    is_threshold: bool
    pattern: tuple


def _segment_terms(problem: StageProblem, segments: int):
    """Per-segment integrals of the gain, flat-cost and ramp-cost terms under full rate."""
    beta, nu = problem.beta, problem.nu
    full = PiecewiseConstantControl(problem.start, problem.horizon, np.full(segments, beta), beta)
    nodes, w, seg = _nodes(full, problem.h.grid)
    ramp = beta * (nodes - full.edges[seg])
    decay = beta * np.exp(-ramp)
    gain = np.bincount(seg, w * problem.h(nodes) * decay, segments)
    flat = np.bincount(seg, w * decay, segments)
    slope = np.bincount(seg, w * ramp * decay, segments)
    return gain, nu * flat, nu * slope


def enumerate_patterns(problem: StageProblem, segments: int):
    """All {0, beta} controls on ``segments`` pieces and their objective (x0 = 0).

    Row ``idx`` of the returned pattern matrix is ``idx`` in binary with the
    first segment as most significant bit.
    """
    if segments > MAX_SEGMENTS:
        raise ValueError(f"at most {MAX_SEGMENTS} segments can be enumerated")
    if segments < 1:
        raise ValueError("need at least one segment")
    idx = np.arange(2 ** segments)
    shifts = segments - 1 - np.arange(segments)
    patterns = (idx[:, None] >> shifts) & 1
    gain, flat, slope = _segment_terms(problem, segments)
    step = problem.beta * (problem.horizon - problem.start) / segments
    before = step * (np.cumsum(patterns, axis=1) - patterns)
    contrib = np.exp(-before) * (gain - before * flat - slope)
    total = step * patterns.sum(axis=1)
    values = (patterns * contrib).sum(axis=1) + terminal_cost(total, problem.nu)
    return patterns, values


def exhaustive_bang_bang_best_response(problem: StageProblem, segments: int) -> BangBangResult:
    """Best {0, beta} control by brute force; ties go to the most front-loaded pattern."""
    patterns, values = enumerate_patterns(problem, segments)
    best = values.max()
    tied = np.flatnonzero(values >= best - 1e-12 * max(1.0, abs(best)))
    pick = int(tied[-1])
    pattern = patterns[pick]
    ones = int(pattern.sum())
    prefix = bool(np.all(pattern[:ones] == 1))
    return BangBangResult(problem.segment_control(pattern), float(values[pick]), prefix,
                          tuple(int(b) for b in pattern))


def cut_time(result: BangBangResult, problem: StageProblem) -> float:
    """End of the full-rate prefix of a bang-bang maximiser."""
    ones = int(np.argmin(result.pattern)) if 0 in result.pattern else len(result.pattern)
    width = (problem.horizon - problem.start) / len(result.pattern)
    return problem.start + ones * width


def suffix_consistency_check(problem: StageProblem, tau: float, segments: int) -> float:
    """Share of segments after ``tau`` where best responses from ``start`` and ``tau`` differ."""
    width = (problem.horizon - problem.start) / segments
    offset = (tau - problem.start) / width
    j = int(round(offset))
    if abs(offset - j) > 1e-9 or not 0 < j < segments:
        raise ValueError("tau must be an interior segment boundary")
    whole = exhaustive_bang_bang_best_response(problem, segments)
    late = StageProblem(problem.h, problem.nu, tau, problem.horizon, problem.beta)
    tail = exhaustive_bang_bang_best_response(late, segments - j)
    differ = np.count_nonzero(np.array(whole.pattern[j:]) != np.array(tail.pattern))
    if differ:
        log.info("suffix best responses differ on %d segment(s) after tau=%g", differ, tau)
    return differ / (segments - j)
