"""Exception types shared across the package."""

from __future__ import annotations


class WeightedHotstuffError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInput(WeightedHotstuffError, ValueError):
    """A latency matrix or results file could not be parsed or validated."""


class InvalidParameter(WeightedHotstuffError, ValueError):
    """An argument violates an operation's preconditions."""


class QuorumUnreachable(WeightedHotstuffError):
    """The non-faulty senders cannot accumulate the required quorum weight.

    ``available`` is the total weight of finite-latency senders and
    ``threshold`` the weight that was needed. ``view`` is filled in by the
    run-level predictors so callers can tell which view stalled.
    """

    def __init__(self, available: float, threshold: float, view: int | None = None):
        self.available = available
        self.threshold = threshold
        self.view = view
        where = "" if view is None else f" in view {view}"
        super().__init__(
            f"quorum unreachable{where}: available weight {available:g} < threshold {threshold:g}"
        )

    def at_view(self, view: int) -> "QuorumUnreachable":
        return QuorumUnreachable(self.available, self.threshold, view)


class EnergyEvaluationFailed(WeightedHotstuffError):
    """The annealer could not evaluate the energy of its initial state."""


class IoFailure(WeightedHotstuffError, OSError):
    """Reading or writing a result file failed."""
