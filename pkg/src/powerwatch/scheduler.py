"""Scan scheduling: adaptive fast scans plus periodic full scans.

Fast-scan logic runs on a 2-minute quantum.  Every tracked county holds a
countdown counter; when it hits zero a fast scan is issued and the counter
reloads from the county's period value V (in quanta).  V adapts to recent
verdicts: a failing scan pulls V toward 1 (scan every 2 minutes), a clean
scan pushes it back toward 5 (every 10 minutes).  Changes to V take effect
at the next reload, not mid-countdown.

Independently, every county known to the system (tracked or not) gets a
full scan of its entire roster on a fixed slow period, default 6 hours.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import UnknownRegion
from .model import ScanKind

TICK_QUANTUM = 2          # minutes between fast-scan counter decrements
SLOW_PERIOD_MINUTES = 360
PERIOD_MIN = 1            # V floor: one quantum = 2 minutes
PERIOD_MAX = 5            # V ceiling: five quanta = 10 minutes
PERIOD_INIT = PERIOD_MAX


class ScanCommand(NamedTuple):
    county: str
    kind: ScanKind


@dataclass
class _Timer:
    counter: int
    period_value: int


class Scheduler:
    """Emits scan commands tick by tick, one tick per minute.

    ``max_commands_per_tick`` optionally caps emission; excess commands
    queue in FIFO order and drain on later ticks ahead of new work.
    """

    def __init__(self, counties: Iterable[str], *,
                 slow_period: int = SLOW_PERIOD_MINUTES,
                 first_slow_tick: int = 0,
                 max_commands_per_tick: int | None = None) -> None:
        self._counties = sorted(set(counties))
        if not self._counties:
            raise UnknownRegion("scheduler needs at least one county")
        if slow_period <= 0:
            raise ValueError("slow_period must be positive")
        if max_commands_per_tick is not None and max_commands_per_tick < 1:
            raise ValueError("max_commands_per_tick must be >= 1 or None")
        self.slow_period = slow_period
        self.next_slow_tick = first_slow_tick
        self.max_commands_per_tick = max_commands_per_tick
        self._timers: dict[str, _Timer] = {}
        self._backlog: deque[ScanCommand] = deque()

    @property
    def counties(self) -> list[str]:
        return list(self._counties)

    def is_tracked(self, county: str) -> bool:
        return county in self._timers

    def set_tracked(self, county: str, tracked: bool) -> None:
        """Start or stop fast scanning for a county.

        Newly tracked counties start at the slowest period.  Untracking
        drops the timer; slow scans continue regardless.
        """
        if county not in set(self._counties):
            raise UnknownRegion(f"unknown county {county!r}")
        if tracked and county not in self._timers:
            self._timers[county] = _Timer(counter=PERIOD_INIT, period_value=PERIOD_INIT)
        elif not tracked:
            self._timers.pop(county, None)

    def period_minutes(self, county: str) -> int:
        """Current fast-scan period for a tracked county, in minutes."""
        if county not in self._timers:
            raise UnknownRegion(f"county {county!r} is not tracked")
        return self._timers[county].period_value * TICK_QUANTUM

    def on_assessment(self, county: str, failure: bool) -> int:
        """Adapt a county's period to the latest verdict; returns new V."""
        if county not in self._timers:
            raise UnknownRegion(f"county {county!r} is not tracked")
        timer = self._timers[county]
        if failure:
            timer.period_value = max(PERIOD_MIN, timer.period_value - 1)
        else:
            timer.period_value = min(PERIOD_MAX, timer.period_value + 1)
        return timer.period_value

    def on_tick(self, tick: int) -> list[ScanCommand]:
        """Commands due at this tick, slow scans ahead of fast ones."""
        due: list[ScanCommand] = []
        if tick >= self.next_slow_tick:
            # Missed boundaries (e.g. resuming after downtime) collapse into
            # one slow scan; replaying stale scans now would probe the present.
            due.extend(ScanCommand(c, ScanKind.SLOW_FULL) for c in self._counties)
            while self.next_slow_tick <= tick:
                self.next_slow_tick += self.slow_period
        if tick % TICK_QUANTUM == 0:
            for county in sorted(self._timers):
                timer = self._timers[county]
                timer.counter -= 1
                if timer.counter <= 0:
                    due.append(ScanCommand(county, ScanKind.FAST_RELIABLE))
                    timer.counter = timer.period_value

        if self.max_commands_per_tick is None:
            return due
        ready = list(self._backlog) + [c for c in due if c not in self._backlog]
        self._backlog.clear()
        emit = ready[: self.max_commands_per_tick]
        self._backlog.extend(ready[self.max_commands_per_tick:])
        return emit
