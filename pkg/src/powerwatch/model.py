"""Core domain types: watchlist entries, scans, events, scenarios.

These are deliberately dumb containers.  Behaviour lives in the scoring,
detector, and engine modules; keeping the types inert makes them easy to
serialize and to build in tests.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple


class ScanKind(Enum):
    """How a region scan selected its targets."""

    FAST_RELIABLE = "fast_reliable"  # sampled reliable watchlist
    SLOW_FULL = "slow_full"          # every known IP in the region


class FailureClass(Enum):
    NONE = "none"
    UNCLASSIFIED = "unclassified"
    INTERNET = "internet"
    POWER = "power"


class PowerStatus(Enum):
    """Simulator ground truth for one county at one tick."""

    ON = "on"
    PARTIAL = "partial"
    OUT = "out"


class InjectionKind(Enum):
    POWER = "power"        # all ISPs in the county stop responding
    INTERNET = "internet"  # a single ISP stops responding


@dataclass
class IpEntry:
    """One residential IP under watch."""

    address: str
    county: str
    isp: str
    initial_score: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.initial_score <= 1.0:
            raise ValueError(f"initial_score out of [0,1]: {self.initial_score!r}")


class ProbeOutcome(NamedTuple):
    """Result of probing one address at one tick.

    A NamedTuple rather than a dataclass: simulate runs create tens of
    millions of these and the construction cost shows up in profiles.
    """

    address: str
    tick: int
    responded: bool


@dataclass
class RegionState:
    """Tracking status of one county, refreshed after slow scans."""

    county: str
    expected_rate: float = 0.0
    watch_size: int = 0
    tracked: bool = False


@dataclass
class ScanResult:
    """Outcome of one scheduled scan of one county.

    ``sampled_scores`` is the score snapshot of the targeted addresses at
    selection time; the detector compares it against the observed response
    rate, so it must not reflect any updates from this same scan.
    """

    county: str
    tick: int
    kind: ScanKind
    outcomes: list[ProbeOutcome]
    sampled_scores: dict[str, float]


@dataclass
class OutageEvent:
    """A contiguous run of failing assessments for one county.

    Events are tracked per report threshold; ``tau`` records which
    threshold stream the event belongs to.  ``end_tick`` stays None while
    the event is still open (interval is half-open when closed).
    """

    county: str
    cls: FailureClass
    start_tick: int
    end_tick: int | None
    tau: float
    peak_gap: float
    isp_breakdown: dict[str, float] = field(default_factory=dict)

    def overlaps(self, start: int, end: int) -> bool:
        mine_end = self.end_tick if self.end_tick is not None else end
        return self.start_tick < end and start < mine_end


@dataclass(frozen=True)
class ScenarioIp:
    """Simulated household: responds with probability base_p when healthy."""

    address: str
    county: str
    isp: str
    base_p: float


@dataclass(frozen=True)
class Injection:
    """Scripted failure over [start_tick, end_tick).

    ``fraction`` bounds how much of the county (or ISP, for internet
    injections) is affected; 1.0 means total.  ``isp`` is required for
    internet injections and ignored for power ones.
    """

    kind: InjectionKind
    county: str
    start_tick: int
    end_tick: int
    isp: str | None = None
    fraction: float = 1.0

    def active_at(self, tick: int) -> bool:
        return self.start_tick <= tick < self.end_tick


@dataclass
class Scenario:
    """A fully scripted world for the simulator backend."""

    seed: int
    duration_ticks: int
    ips: list[ScenarioIp]
    injections: list[Injection]


@dataclass
class ValidationReport:
    """Split of raw watchlist rows into usable entries and rejects."""

    entries: list[IpEntry]
    rejected: list[tuple[int, str]]  # (row index, reason)


def _valid_address(text: str) -> bool:
    try:
        ipaddress.ip_address(text)
    except ValueError:
        return False
    return True


def validate_watchlist(rows: list[dict[str, str]]) -> ValidationReport:
    """Validate raw watchlist rows (as parsed from CSV).

    Rejects rows with malformed addresses, blank county/ISP fields,
    unparseable or out-of-range initial scores, and duplicate addresses
    (first occurrence wins).  Row indices in the report are 0-based over
    the input list.
    """
    entries: list[IpEntry] = []
    rejected: list[tuple[int, str]] = []
    seen: set[str] = set()
    for idx, row in enumerate(rows):
        address = (row.get("address") or "").strip()
        county = (row.get("county") or "").strip()
        isp = (row.get("isp") or "").strip()
        raw_score = (row.get("initial_score") or "").strip()
        if not _valid_address(address):
            rejected.append((idx, f"malformed address {address!r}"))
            continue
        if not county:
            rejected.append((idx, "missing county"))
            continue
        if not isp:
            rejected.append((idx, "missing isp"))
            continue
        score = 0.5
        if raw_score:
            try:
                score = float(raw_score)
            except ValueError:
                rejected.append((idx, f"bad initial_score {raw_score!r}"))
                continue
            if not 0.0 <= score <= 1.0:
                rejected.append((idx, f"initial_score out of range: {score}"))
                continue
        if address in seen:
            rejected.append((idx, f"duplicate address {address}"))
            continue
        seen.add(address)
        entries.append(IpEntry(address, county, isp, score))
    return ValidationReport(entries, rejected)
