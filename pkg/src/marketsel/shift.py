"""Piecewise-stationary data generation and interval-aware benchmarks.

A shift schedule is an ordered list of (duration, distribution) blocks.
Agents are never told the block boundaries; only the benchmark sees
them, scoring each block against its own best fixed vector in
hindsight.  That per-interval benchmark dominates the whole-sequence
one, which is what makes a single shift expensive for a learner that
has fully committed to the first block's model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .regret import hindsight_best
from .simplex import as_simplex

__all__ = [
    "ShiftSchedule",
    "generate_shifted_states",
    "interval_benchmark",
    "shifted_regret",
]


@dataclass
class ShiftSchedule:
    """Ordered intervals (duration, distribution) covering the horizon."""

    intervals: list  # of (int duration, array-like distribution)

    def __post_init__(self):
        if not self.intervals:
            raise InvalidInputError("schedule needs at least one interval")
        cleaned = []
        for duration, dist in self.intervals:
            if int(duration) < 1:
                raise InvalidInputError("interval durations must be positive")
            cleaned.append((int(duration), np.asarray(dist, dtype=np.float64)))
        self.intervals = cleaned

    def validate(self, n_states: int, delta: float) -> None:
        for i, (_, dist) in enumerate(self.intervals):
            as_simplex(dist, n_states=n_states, floor=delta, name=f"interval {i} distribution")

    def total_duration(self) -> int:
        return sum(duration for duration, _ in self.intervals)

    def n_intervals(self) -> int:
        return len(self.intervals)

    def boundaries(self) -> list[tuple[int, int]]:
        """Half-open [start, end) index ranges of the blocks."""
        out = []
        start = 0
        for duration, _ in self.intervals:
            out.append((start, start + duration))
            start += duration
        return out

    def to_dict(self) -> list[dict]:
        return [
            {"duration": duration, "distribution": dist.tolist()}
            for duration, dist in self.intervals
        ]

    @classmethod
    def from_dicts(cls, items: list[dict]) -> "ShiftSchedule":
        return cls([(item["duration"], item["distribution"]) for item in items])


def generate_shifted_states(
    schedule: ShiftSchedule, rng: np.random.Generator
) -> np.ndarray:
    """Concatenated i.i.d. blocks, one uniform draw per step.

    All uniforms come from one vectorized call and each block applies
    its own inverse CDF, so a single-interval schedule reproduces
    stationary sampling draw for draw.
    """
    total = schedule.total_duration()
    u = rng.random(total)
    states = np.empty(total, dtype=np.int64)
    for (start, end), (_, dist) in zip(schedule.boundaries(), schedule.intervals):
        cdf = np.cumsum(dist)
        states[start:end] = np.minimum(
            np.searchsorted(cdf, u[start:end], side="right"), dist.size - 1
        )
    return states


def interval_benchmark(
    schedule: ShiftSchedule, states: np.ndarray, n_states: int | None = None
) -> tuple[float, list]:
    """Sum of per-block hindsight-best values, with the block maximizers.

    Dominates the whole-sequence hindsight benchmark: refining the
    partition can only increase the achievable value.
    """
    states = np.asarray(states, dtype=np.int64)
    if states.size != schedule.total_duration():
        raise InvalidInputError("sequence length must equal the schedule duration")
    total = 0.0
    maximizers = []
    for start, end in schedule.boundaries():
        q_hat, value = hindsight_best(states[start:end], n_states)
        total += value
        maximizers.append(q_hat)
    return total, maximizers


def shifted_regret(
    realized_utilities: np.ndarray,
    schedule: ShiftSchedule,
    states: np.ndarray,
    n_states: int | None = None,
) -> float:
    """Interval benchmark minus the realized cumulative utility."""
    utilities = np.asarray(realized_utilities, dtype=np.float64)
    states = np.asarray(states, dtype=np.int64)
    if utilities.shape[0] != states.size:
        raise InvalidInputError("need one utility per step")
    benchmark, _ = interval_benchmark(schedule, states, n_states)
    return benchmark - float(utilities.sum())
