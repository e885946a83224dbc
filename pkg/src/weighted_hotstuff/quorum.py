"""Weighted quorum algebra.

Covers the WHEAT-style discrete scheme (``2f`` replicas at ``v_max``, the
rest at ``v_min``), the equal-weight baseline, continuous weight vectors,
the time for a leader to gather a weighted quorum, and the exhaustive
availability/consistency check that continuous weight vectors must pass.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameter, QuorumUnreachable

WEIGHT_TOLERANCE = 1e-9
MAX_WEIGHT = 2.0
MAX_SAFETY_REPLICAS = 10


@dataclass(frozen=True)
class ProtocolConfig:
    f: int
    delta: int

    def __post_init__(self) -> None:
        if isinstance(self.f, bool) or int(self.f) != self.f or self.f < 1:
            raise InvalidParameter(f"f must be an integer >= 1, got {self.f}")
        if isinstance(self.delta, bool) or int(self.delta) != self.delta or self.delta < 0:
            raise InvalidParameter(f"delta must be an integer >= 0, got {self.delta}")

    @property
    def n(self) -> int:
        return 3 * self.f + 1 + self.delta

    @property
    def q_v(self) -> int:
        return 2 * (self.f + self.delta) + 1

    @property
    def v_max(self) -> float:
        # (f + delta) / f rounds once, unlike 1 + delta / f
        return (self.f + self.delta) / self.f

    @property
    def v_min(self) -> float:
        return 1.0


def make_config(f: int, delta: int) -> ProtocolConfig:
    return ProtocolConfig(f, delta)


class Scheme(enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    EQUAL_BASELINE = "equal-baseline"


@dataclass(frozen=True)
class WeightAssignment:
    """Per-replica voting power plus the quorum weight the leader must gather.

    ``threshold`` is ``q_v`` for the discrete and baseline schemes and the
    availability bound (total weight minus the ``f`` heaviest) for continuous
    vectors. Only continuous weights are capped at ``MAX_WEIGHT``; a discrete
    ``v_max`` exceeds it whenever ``delta > f``.
    """

    weights: tuple[float, ...]
    scheme: Scheme
    threshold: float

    def __post_init__(self) -> None:
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        cap = MAX_WEIGHT if self.scheme is Scheme.CONTINUOUS else math.inf
        for w in weights:
            if not (-WEIGHT_TOLERANCE <= w <= cap + WEIGHT_TOLERANCE):
                raise InvalidParameter(f"weights must lie in [0, {cap}], got {w}")
        if not self.threshold > 0:
            raise InvalidParameter(f"quorum threshold must be positive, got {self.threshold}")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


def make_discrete_assignment(config: ProtocolConfig, vmax_positions: Iterable[int]) -> WeightAssignment:
    positions = list(vmax_positions)
    if len(set(positions)) != len(positions) or len(positions) != 2 * config.f:
        raise InvalidParameter(
            f"need exactly {2 * config.f} distinct v_max positions, got {sorted(positions)}"
        )
    if any(not 0 <= p < config.n for p in positions):
        raise InvalidParameter(f"v_max positions out of range for n={config.n}: {sorted(positions)}")
    chosen = set(positions)
    weights = tuple(config.v_max if i in chosen else config.v_min for i in range(config.n))
    return WeightAssignment(weights, Scheme.DISCRETE, config.q_v)


def make_equal_assignment(config: ProtocolConfig) -> WeightAssignment:
    """All weights equal to 1 with the weighted threshold ``q_v`` left unchanged."""
    return WeightAssignment((1.0,) * config.n, Scheme.EQUAL_BASELINE, config.q_v)


def make_continuous_assignment(weights: Sequence[float], f: int) -> WeightAssignment:
    """Wrap a real-valued vector, deriving its threshold from the availability bound.

    Does not check consistency; see :func:`check_continuous_safety`.
    """
    threshold = availability_threshold(weights, f)
    if not threshold > 0:
        raise InvalidParameter(f"weights leave no quorum weight after {f} failures: {weights}")
    return WeightAssignment(tuple(weights), Scheme.CONTINUOUS, threshold)


def vmax_holders(assignment: WeightAssignment, config: ProtocolConfig) -> list[int]:
    return [i for i, w in enumerate(assignment.weights)
            if abs(w - config.v_max) <= WEIGHT_TOLERANCE]


def time_to_form_quorum(latencies: Sequence[float] | np.ndarray,
                        weights: WeightAssignment | Sequence[float] | np.ndarray,
                        threshold: float | None = None) -> float:
    """Arrival time of the message that completes a weighted quorum.

    Messages are taken fastest first (ties by lower replica index) and their
    weights accumulated until ``threshold`` is reached. Faulty senders are
    passed as ``inf`` latency. Raises :class:`QuorumUnreachable` when the
    finite-latency senders cannot reach the threshold.
    """
    if isinstance(weights, WeightAssignment):
        if threshold is None:
            threshold = weights.threshold
        w = weights.weights
    else:
        w = weights
    if threshold is None or not threshold > 0:
        raise InvalidParameter(f"threshold must be positive, got {threshold}")
    lat = [float(x) for x in latencies]
    if len(lat) != len(w):
        raise InvalidParameter(f"{len(lat)} latencies for {len(w)} weights")
    target = threshold - WEIGHT_TOLERANCE
    acc = 0.0
    for i in sorted(range(len(lat)), key=lat.__getitem__):
        t = lat[i]
        if math.isinf(t):
            break
        acc += w[i]
        if acc >= target:
            return t
    raise QuorumUnreachable(acc, threshold)


def select_faulty(weights: WeightAssignment | Sequence[float], f: int) -> list[int]:
    """Indices of the ``f`` heaviest replicas, heaviest first, ties by lower index."""
    w = weights.weights if isinstance(weights, WeightAssignment) else tuple(weights)
    if not 0 <= f < len(w):
        raise InvalidParameter(f"f must be in [0, n), got f={f}, n={len(w)}")
    return sorted(range(len(w)), key=lambda i: (-w[i], i))[:f]


def availability_threshold(weights: Sequence[float], f: int) -> float:
    """Weight left once the ``f`` heaviest replicas fail."""
    w = list(weights)
    faulty = set(select_faulty(w, f))
    return math.fsum(x for i, x in enumerate(w) if i not in faulty)


@dataclass(frozen=True)
class QuorumSafetyReport:
    valid: bool
    threshold: float
    # (A, B) as sorted index tuples, or None
    witness_pair: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    # threshold shortfall when no quorum survives the f heaviest failures
    availability_deficit: float | None = None

    @property
    def witness(self):
        return self.witness_pair if self.witness_pair is not None else self.availability_deficit


def _mask_members(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if mask >> i & 1)


def check_continuous_safety(weights: WeightAssignment | Sequence[float], f: int) -> QuorumSafetyReport:
    """Exhaustively verify availability and ``f + 1`` quorum overlap.

    The quorum weight is the availability bound. Every pair of subsets whose
    weight reaches it (including a subset paired with itself) must share at
    least ``f + 1`` replicas. Cost is ``O(4^n)``; ``n`` is capped at
    ``MAX_SAFETY_REPLICAS``. The first violating pair in ascending-bitmask
    order is returned as the witness.
    """
    w = np.asarray(weights.weights if isinstance(weights, WeightAssignment) else weights, dtype=float)
    n = len(w)
    if n > MAX_SAFETY_REPLICAS:
        raise InvalidParameter(f"safety check supports n <= {MAX_SAFETY_REPLICAS}, got {n}")
    threshold = availability_threshold(w, f)
    if not threshold > WEIGHT_TOLERANCE:
        return QuorumSafetyReport(False, threshold, availability_deficit=WEIGHT_TOLERANCE - threshold)

    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    # correctly rounded sums, like the threshold itself, so that subsets
    # sitting on the tolerance edge are classified consistently
    subset_weight = np.array([math.fsum(w[row.astype(bool)]) for row in bits])
    quorums = masks[subset_weight >= threshold - WEIGHT_TOLERANCE]
    popcount = bits.sum(axis=1)
    overlap = popcount[quorums[:, None] & quorums[None, :]]
    bad = np.triu(overlap < f + 1)
    if not bad.any():
        return QuorumSafetyReport(True, threshold)
    i, j = np.argwhere(bad)[0]
    pair = (_mask_members(int(quorums[i]), n), _mask_members(int(quorums[j]), n))
    return QuorumSafetyReport(False, threshold, witness_pair=pair)


def verify_witness(report: QuorumSafetyReport, weights: Sequence[float], f: int) -> bool:
    """Independently confirm that an invalid report's witness really is a violation."""
    if report.valid:
        return report.witness is None
    if report.availability_deficit is not None:
        return availability_threshold(weights, f) <= WEIGHT_TOLERANCE
    a, b = report.witness_pair
    target = report.threshold - WEIGHT_TOLERANCE
    return (math.fsum(weights[i] for i in a) >= target
            and math.fsum(weights[i] for i in b) >= target
            and len(set(a) & set(b)) < f + 1)

