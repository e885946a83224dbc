"""Simulated annealing over weight assignments and leader rotations.

Four neighbourhoods are provided: swapping a ``v_max`` holder with a
``v_min`` holder, swapping two leader positions, a fair coin between the
two, and redrawing one continuous weight within ``+-0.1``. Energy is the
predicted total latency, evaluated on frozen noise (one simulation seed per
annealing run) so that candidates are compared on identical draws.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .errors import EnergyEvaluationFailed, InvalidParameter, QuorumUnreachable
from .hotstuff import LeaderSchedule, predict_run
from .netmodel import LatencyMatrix
from .quorum import (
    MAX_WEIGHT,
    WEIGHT_TOLERANCE,
    Scheme,
    WeightAssignment,
    check_continuous_safety,
)

log = logging.getLogger(__name__)

PERTURBATION_STEP = 0.1


@dataclass(frozen=True)
class AnnealParams:
    """Cooling schedule. ``None`` temperatures are derived from the initial energy:
    20% of it to start, and a thousandth of the start temperature to stop.
    """

    initial_temperature: float | None = None
    cooling_rate: float = 0.99
    min_temperature: float | None = None
    max_evaluations: int = 5000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.cooling_rate < 1:
            raise InvalidParameter(f"cooling_rate must be in (0, 1), got {self.cooling_rate}")
        if self.min_temperature is not None and not self.min_temperature > 0:
            raise InvalidParameter(f"min_temperature must be positive, got {self.min_temperature}")
        if self.initial_temperature is not None and not self.initial_temperature > 0:
            raise InvalidParameter(
                f"initial_temperature must be positive, got {self.initial_temperature}")
        if self.max_evaluations < 1:
            raise InvalidParameter(f"max_evaluations must be >= 1, got {self.max_evaluations}")

    def with_overrides(self, **overrides) -> "AnnealParams":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise InvalidParameter(f"unknown anneal parameters: {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)


@dataclass(frozen=True)
class CandidateState:
    weights: WeightAssignment
    schedule: LeaderSchedule
    energy: float | None = None

    def with_energy(self, energy: float) -> "CandidateState":
        return dataclasses.replace(self, energy=energy)


EnergyFn = Callable[[CandidateState], float]
PerturbFn = Callable[[CandidateState, np.random.Generator], CandidateState]


def anneal(initial: CandidateState, energy_fn: EnergyFn, perturb: PerturbFn,
           params: AnnealParams = AnnealParams()) -> CandidateState:
    """Minimise ``energy_fn`` and return the best state visited.

    Candidates whose energy cannot be evaluated (unreachable quorum) are
    rejected. A perturbation that returns its input unchanged (an infeasible
    move) still counts as one evaluation.
    """
    try:
        current = initial.with_energy(energy_fn(initial))
    except QuorumUnreachable as exc:
        raise EnergyEvaluationFailed(f"initial state cannot be evaluated: {exc}") from exc
    if not math.isfinite(current.energy):
        raise EnergyEvaluationFailed(f"initial energy is not finite: {current.energy}")
    best = current

    temperature = params.initial_temperature
    if temperature is None:
        temperature = 0.2 * current.energy
    if not temperature > 0:
        # zero-latency start: nothing to improve on
        return best
    min_temperature = params.min_temperature
    if min_temperature is None:
        min_temperature = 1e-3 * temperature

    rng = np.random.default_rng(params.seed)
    evaluations = 0
    accepted = 0
    while temperature >= min_temperature and evaluations < params.max_evaluations:
        evaluations += 1
        candidate = perturb(current, rng)
        if candidate is not current:
            try:
                energy = energy_fn(candidate)
            except QuorumUnreachable:
                energy = None
            if energy is not None:
                candidate = candidate.with_energy(energy)
                delta = energy - current.energy
                if delta < 0 or rng.random() < math.exp(-delta / temperature):
                    current = candidate
                    accepted += 1
                if energy < best.energy:
                    best = candidate
        temperature *= params.cooling_rate
    log.debug("anneal: %d evaluations, %d accepted, best %.3f (initial %.3f)",
              evaluations, accepted, best.energy, initial.energy or float("nan"))
    return best


def perturb_discrete_weights(state: CandidateState, rng: np.random.Generator) -> CandidateState:
    """Swap the weights of one ``v_max`` holder and one ``v_min`` holder."""
    w = state.weights.weights
    hi, lo = max(w), min(w)
    if hi - lo <= WEIGHT_TOLERANCE:
        return state
    holders_max = [i for i, x in enumerate(w) if abs(x - hi) <= WEIGHT_TOLERANCE]
    holders_min = [i for i, x in enumerate(w) if abs(x - lo) <= WEIGHT_TOLERANCE]
    a = holders_max[rng.integers(len(holders_max))]
    b = holders_min[rng.integers(len(holders_min))]
    new = list(w)
    new[a], new[b] = new[b], new[a]
    weights = dataclasses.replace(state.weights, weights=tuple(new))
    return CandidateState(weights, state.schedule)


def perturb_leader_schedule(state: CandidateState, rng: np.random.Generator) -> CandidateState:
    """Exchange the leaders at two distinct schedule positions."""
    leaders = list(state.schedule.leaders)
    if len(leaders) < 2:
        return state
    i, j = rng.choice(len(leaders), size=2, replace=False)
    leaders[i], leaders[j] = leaders[j], leaders[i]
    return CandidateState(state.weights, LeaderSchedule(tuple(leaders)))


def perturb_combined(state: CandidateState, rng: np.random.Generator) -> CandidateState:
    if rng.random() < 0.5:
        return perturb_discrete_weights(state, rng)
    return perturb_leader_schedule(state, rng)


def perturb_continuous(state: CandidateState, rng: np.random.Generator, *, f: int,
                       step: float = PERTURBATION_STEP) -> CandidateState:
    """Redraw one replica's weight from U(w - step, w + step), clamped to [0, 2].

    Returns ``state`` itself when the candidate fails the quorum safety
    check; otherwise the candidate carries its recomputed threshold.
    """
    w = list(state.weights.weights)
    i = int(rng.integers(len(w)))
    w[i] = min(max(rng.uniform(w[i] - step, w[i] + step), 0.0), MAX_WEIGHT)
    report = check_continuous_safety(w, f)
    if not report.valid:
        return state
    weights = WeightAssignment(tuple(w), Scheme.CONTINUOUS, report.threshold)
    return CandidateState(weights, state.schedule)


def make_energy_fn(matrix: LatencyMatrix, views: int, seed: int, static: bool = False,
                   predictor=predict_run) -> EnergyFn:
    """Total predicted latency of a state on a fixed topology and fixed noise."""

    def energy(state: CandidateState) -> float:
        return predictor(matrix, state.weights, state.schedule, views, (), seed,
                         static).total_latency

    return energy


def continuous_perturbation(f: int, step: float = PERTURBATION_STEP) -> PerturbFn:
    return partial(perturb_continuous, f=f, step=step)


def as_continuous(weights: WeightAssignment, f: int) -> WeightAssignment:
    """Re-tag a (discrete) assignment as the starting point of a continuous search."""
    report = check_continuous_safety(weights.weights, f)
    if not report.valid:
        raise InvalidParameter(f"starting weights are not quorum-safe: {report}")
    return WeightAssignment(weights.weights, Scheme.CONTINUOUS, report.threshold)
