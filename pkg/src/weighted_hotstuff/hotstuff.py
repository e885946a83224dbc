"""Latency prediction for basic (weighted) HotStuff.

A view is four sequential quorum events at the leader: it gathers new-view
messages, then prepare, pre-commit and commit votes. Each event samples a
fresh latency vector and the view costs the sum of the four quorum times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InvalidParameter, QuorumUnreachable
from .netmodel import PHASES, LatencyMatrix, make_rng, sample_latency_vector
from .quorum import WeightAssignment, time_to_form_quorum


@dataclass(frozen=True)
class LeaderSchedule:
    """Leader per view.

    The sequence is cycled when a run has more views than entries, so a
    length-``n`` rotation describes an arbitrarily long run.
    """

    leaders: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "leaders", tuple(int(x) for x in self.leaders))
        if not self.leaders:
            raise InvalidParameter("leader schedule must not be empty")
        if any(x < 0 for x in self.leaders):
            raise InvalidParameter("leader indices must be non-negative")

    @classmethod
    def round_robin(cls, n: int, views: int | None = None) -> "LeaderSchedule":
        return cls(tuple(v % n for v in range(n if views is None else views)))

    def __len__(self) -> int:
        return len(self.leaders)

    def leader(self, view: int) -> int:
        return self.leaders[view % len(self.leaders)]

    def expand(self, views: int) -> tuple[int, ...]:
        return tuple(self.leader(v) for v in range(views))

    def check(self, n: int) -> None:
        if max(self.leaders) >= n:
            raise InvalidParameter(f"leader index {max(self.leaders)} out of range for n={n}")


@dataclass(frozen=True)
class ViewTrace:
    view: int
    leader: int
    t_prepare: float
    t_precommit: float
    t_commit: float
    t_decide: float
    # one vector per quorum event, in phase order
    latencies: tuple[tuple[float, ...], ...] = field(default=(), repr=False, compare=False)

    @property
    def total(self) -> float:
        return self.t_prepare + self.t_precommit + self.t_commit + self.t_decide

    @property
    def quorum_times(self) -> tuple[float, float, float, float]:
        return (self.t_prepare, self.t_precommit, self.t_commit, self.t_decide)


@dataclass(frozen=True)
class ScenarioResult:
    traces: tuple
    faulty_set: frozenset[int]
    seed: int | None
    views: int

    @property
    def total_latency(self) -> float:
        return math.fsum(_trace_latency(t) for t in self.traces)

    @property
    def average_per_view(self) -> float:
        return self.total_latency / self.views if self.views else 0.0


def _trace_latency(trace) -> float:
    return trace.total if isinstance(trace, ViewTrace) else trace.view_latency


def faulty_latencies(latencies: np.ndarray, faulty: Iterable[int]) -> np.ndarray:
    faulty = list(faulty)
    if faulty:
        latencies[faulty] = math.inf
    return latencies


def _check_inputs(matrix: LatencyMatrix, weights: WeightAssignment, faulty: Iterable[int]) -> None:
    if weights.n != matrix.n:
        raise InvalidParameter(f"{weights.n} weights for a {matrix.n}-replica topology")
    if any(not 0 <= i < matrix.n for i in faulty):
        raise InvalidParameter(f"faulty replica out of range for n={matrix.n}")


def predict_view(matrix: LatencyMatrix, leader: int, weights: WeightAssignment,
                 threshold: float | None, faulty: Iterable[int], rng: np.random.Generator,
                 *, view: int = 0, static: bool = False) -> ViewTrace:
    """Predict one view led by ``leader``.

    ``threshold`` defaults to the assignment's own. Faulty senders never
    deliver (their latency is ``inf``).
    """
    faulty = tuple(faulty)
    _check_inputs(matrix, weights, faulty)
    threshold = weights.threshold if threshold is None else threshold
    vectors = []
    times = []
    for kind in PHASES:
        lat = faulty_latencies(sample_latency_vector(matrix, leader, kind, rng, static), faulty)
        vectors.append(tuple(lat.tolist()))
        try:
            times.append(time_to_form_quorum(lat, weights.weights, threshold))
        except QuorumUnreachable as exc:
            raise exc.at_view(view) from None
    return ViewTrace(view, leader, *times, latencies=tuple(vectors))


def predict_run(matrix: LatencyMatrix, weights: WeightAssignment, schedule: LeaderSchedule,
                views: int, faulty: Iterable[int] = (), seed: int = 0,
                static: bool = False) -> ScenarioResult:
    """Run ``views`` consecutive views; offsets are drawn from a generator seeded with ``seed``."""
    if views < 0:
        raise InvalidParameter(f"views must be non-negative, got {views}")
    faulty = frozenset(faulty)
    schedule.check(matrix.n)
    rng = make_rng(seed)
    order = sorted(faulty)
    traces = tuple(
        predict_view(matrix, schedule.leader(v), weights, None, order, rng, view=v, static=static)
        for v in range(views)
    )
    return ScenarioResult(traces, faulty, seed, views)

