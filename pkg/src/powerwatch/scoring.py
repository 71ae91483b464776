"""Per-IP reliability scores and region tracking decisions.

Each watched IP carries an exponentially weighted moving average of its
probe responses:

    S(i) = S(i-1) * (1 - alpha) + alpha * sigma(i)

with sigma(i) = 1 for a response and 0 for silence.  A region's expected
response rate is the sum of its members' scores, and both the decision to
track a region at all and the size of its fast-scan sample derive from
that sum.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

from .errors import OrderingError, SizingError
from .model import ProbeOutcome

DEFAULT_ALPHA = 0.01
DEFAULT_INITIAL_SCORE = 0.5

# Regions whose expected response rate falls below this are not tracked:
# with fewer than ~10 expected responders the failure signal is noise.
TRACKING_CUTOFF = 10.0


class ScoreStore:
    """Mutable map of address -> (score, probe count, last tick).

    Updates must arrive in non-decreasing tick order per address; the
    store refuses to rewind because EWMA state cannot be un-applied.
    """

    def __init__(self, alpha: float = DEFAULT_ALPHA,
                 initial_score: float = DEFAULT_INITIAL_SCORE) -> None:
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {alpha}")
        if not 0.0 <= initial_score <= 1.0:
            raise ValueError(f"initial_score must be in [0,1], got {initial_score}")
        self.alpha = alpha
        self.initial_score = initial_score
        self._scores: dict[str, float] = {}
        self._probes: dict[str, int] = {}
        self._last_tick: dict[str, int] = {}

    def add(self, address: str, initial: float | None = None) -> None:
        """Register an address; re-adding an existing one is a no-op."""
        if address in self._scores:
            return
        score = self.initial_score if initial is None else initial
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {score}")
        self._scores[address] = score
        self._probes[address] = 0

    def __contains__(self, address: str) -> bool:
        return address in self._scores

    def __len__(self) -> int:
        return len(self._scores)

    def addresses(self) -> Iterable[str]:
        return self._scores.keys()

    def score(self, address: str) -> float:
        return self._scores[address]

    def probe_count(self, address: str) -> int:
        return self._probes[address]

    def update(self, outcome: ProbeOutcome) -> float:
        """Fold one probe outcome into the address score.

        Returns the new score.  Raises OrderingError if the outcome is
        older than the last one applied for the same address.
        """
        addr = outcome.address
        last = self._last_tick.get(addr)
        if last is not None and outcome.tick < last:
            raise OrderingError(
                f"{addr}: outcome at tick {outcome.tick} after tick {last}")
        sigma = 1.0 if outcome.responded else 0.0
        new = self._scores[addr] * (1.0 - self.alpha) + self.alpha * sigma
        self._scores[addr] = new
        self._probes[addr] += 1
        self._last_tick[addr] = outcome.tick
        return new

    def update_many(self, outcomes: Iterable[ProbeOutcome]) -> None:
        for outcome in outcomes:
            self.update(outcome)

    def expected_rate(self, addresses: Iterable[str]) -> float:
        """Sum of current scores over the given addresses."""
        return sum(self._scores[a] for a in addresses)

    def snapshot(self, addresses: Iterable[str] | None = None) -> dict[str, float]:
        """Copy of current scores, for the given addresses or all."""
        if addresses is None:
            return dict(self._scores)
        return {a: self._scores[a] for a in addresses}


def reliable_watch_size(expected_rate: float) -> int:
    """Fast-scan sample size for a region with the given expected rate.

    N = min(floor(E), floor(100 * log10(E))).  The linear term governs
    small regions (every expected responder is needed); the log term caps
    the probe budget for large ones.  Raises SizingError below the
    tracking cutoff, where no reliable watchlist exists.
    """
    if expected_rate < TRACKING_CUTOFF:
        raise SizingError(
            f"expected rate {expected_rate:.3f} below tracking cutoff {TRACKING_CUTOFF}")
    return min(math.floor(expected_rate),
               math.floor(100.0 * math.log10(expected_rate)))


def is_trackable(expected_rate: float) -> bool:
    return expected_rate >= TRACKING_CUTOFF


def mean_score(scores: Mapping[str, float]) -> float:
    if not scores:
        raise ValueError("mean of empty score map")
    return sum(scores.values()) / len(scores)
