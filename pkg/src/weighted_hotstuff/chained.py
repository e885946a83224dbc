"""Latency prediction for weighted Chained HotStuff.

Every view proposes a new block and advances each in-flight block by one
quorum stage. A block proposed in view ``v`` gathers new-view messages in
``v``, prepare votes in ``v + 1``, pre-commit votes in ``v + 2`` and commit
votes in ``v + 3``, and is executed in ``v + 4``. The concurrent stage
quorums of a view complete in parallel, so a view lasts as long as its
slowest stage. The first ``PIPELINE_DEPTH - 1`` views run with a partially
filled pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import InvalidParameter, QuorumUnreachable
from .hotstuff import LeaderSchedule, ScenarioResult, _check_inputs, faulty_latencies
from .netmodel import PHASES, LatencyMatrix, make_rng, sample_latency_vector
from .quorum import WeightAssignment, time_to_form_quorum

PIPELINE_DEPTH = len(PHASES)


@dataclass(frozen=True)
class ChainedViewTrace:
    view: int
    leader: int
    # stage_times[s] is the quorum time of the block at stage s + 1 (newest block first)
    stage_times: tuple[float, ...]
    latencies: tuple[tuple[float, ...], ...] = field(default=(), repr=False, compare=False)

    @property
    def view_latency(self) -> float:
        return max(self.stage_times)


def predict_chained_view(matrix: LatencyMatrix, leader: int, weights: WeightAssignment,
                         faulty: Iterable[int], rng: np.random.Generator, *, view: int,
                         static: bool = False) -> ChainedViewTrace:
    faulty = tuple(faulty)
    _check_inputs(matrix, weights, faulty)
    stages = min(view + 1, PIPELINE_DEPTH)
    # All four vectors are drawn every view, warm-up or not, so the generator
    # advances exactly as in the basic model and stage s of chained view v sees
    # the same messages as phase s of basic view v under one seed.
    drawn = [sample_latency_vector(matrix, leader, kind, rng, static) for kind in PHASES]
    times = []
    vectors = []
    for raw in drawn[:stages]:
        lat = faulty_latencies(raw, faulty)
        vectors.append(tuple(lat.tolist()))
        try:
            times.append(time_to_form_quorum(lat, weights.weights, weights.threshold))
        except QuorumUnreachable as exc:
            raise exc.at_view(view) from None
    return ChainedViewTrace(view, leader, tuple(times), tuple(vectors))


def predict_chained_run(matrix: LatencyMatrix, weights: WeightAssignment, schedule: LeaderSchedule,
                        views: int, faulty: Iterable[int] = (), seed: int = 0,
                        static: bool = False) -> ScenarioResult:
    if views < 0:
        raise InvalidParameter(f"views must be non-negative, got {views}")
    faulty = frozenset(faulty)
    schedule.check(matrix.n)
    rng = make_rng(seed)
    order = sorted(faulty)
    traces = tuple(
        predict_chained_view(matrix, schedule.leader(v), weights, order, rng, view=v, static=static)
        for v in range(views)
    )
    return ScenarioResult(traces, faulty, seed, views)
