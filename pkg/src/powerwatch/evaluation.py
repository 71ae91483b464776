"""Evaluation against ground truth: intervals, confusion counts, metrics.

Truth arrives as per-county time series of outage fractions, either exact
(from the simulator) or sampled (utility-reported customer counts).  Both
reduce to half-open outage intervals, which are matched against detected
events with a tolerance buffer: a detection and a truth interval agree if
the distance between the two intervals is under the buffer.

Counties are counted once per evaluation window, in fixed priority:
TP if a detection matches truth, else FP if there is any detection,
else FN if there is any truth outage, else TN.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import UnknownRegion
from .model import FailureClass, OutageEvent

logger = logging.getLogger(__name__)

DEFAULT_BUFFER_MINUTES = 360
DEFAULT_TRUTH_THRESHOLD = 0.5

# Stand-in end for events still open when the data ends.
_OPEN_END = 1 << 62


class GroundTruthSource(Enum):
    SIM = "sim"
    UTILITY = "utility"


@dataclass
class GroundTruthSeries:
    """Outage fraction over time for one county.

    ``samples`` are (tick, fraction_out) points in increasing tick order;
    each fraction holds until the next sample.  ``end_tick`` closes the
    last step (exclusive).
    """

    county: str
    samples: list[tuple[int, float]]
    end_tick: int
    source: GroundTruthSource = GroundTruthSource.SIM


def truth_outage_intervals(series: GroundTruthSeries,
                           threshold: float = DEFAULT_TRUTH_THRESHOLD,
                           ) -> list[tuple[int, int]]:
    """Maximal half-open runs where fraction_out >= threshold."""
    intervals: list[tuple[int, int]] = []
    open_start: int | None = None
    for tick, fraction in series.samples:
        if fraction >= threshold:
            if open_start is None:
                open_start = tick
        elif open_start is not None:
            intervals.append((open_start, tick))
            open_start = None
    if open_start is not None:
        intervals.append((open_start, series.end_tick))
    return intervals


def interval_distance(a: tuple[int, int], b: tuple[int, int]) -> int:
    """Gap between two half-open intervals; 0 when they touch or overlap."""
    (s1, e1), (s2, e2) = a, b
    return max(0, max(s1, s2) - min(e1, e2))


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass
class Metrics:
    """Derived rates; None where the denominator is empty."""

    accuracy: float | None
    false_positive_rate: float | None
    false_omission_rate: float | None


def metrics(counts: ConfusionCounts) -> Metrics:
    def ratio(num: int, den: int) -> float | None:
        return num / den if den else None

    return Metrics(
        accuracy=ratio(counts.tp + counts.tn, counts.total),
        false_positive_rate=ratio(counts.fp, counts.fp + counts.tn),
        false_omission_rate=ratio(counts.fn, counts.fn + counts.tn),
    )


def _event_bounds(event: OutageEvent, default_end: int) -> tuple[int, int]:
    end = event.end_tick if event.end_tick is not None else default_end
    return event.start_tick, max(end, event.start_tick + 1)


def _clip(interval: tuple[int, int],
          window: tuple[int, int] | None) -> tuple[int, int] | None:
    if window is None:
        return interval
    s, e = interval
    if e <= window[0] or s >= window[1]:
        return None
    return s, e


def confusion(events_by_county: Mapping[str, Sequence[OutageEvent]],
              truths_by_county: Mapping[str, Sequence[tuple[int, int]]],
              *, buffer_ticks: int = DEFAULT_BUFFER_MINUTES,
              window: tuple[int, int] | None = None,
              classes: frozenset[FailureClass] = frozenset({FailureClass.POWER}),
              ) -> ConfusionCounts:
    """County-level confusion counts for one evaluation window.

    The county universe is the key set of ``truths_by_county`` (counties
    without outages map to empty lists).  Detections are pre-filtered to
    ``classes`` (power-only by default).  Each county lands in exactly
    one cell, so counts always sum to the universe size.
    """
    unknown = set(events_by_county) - set(truths_by_county)
    if unknown:
        raise UnknownRegion(
            f"events for counties outside the truth universe: {sorted(unknown)}")
    counts = ConfusionCounts()
    default_end = window[1] if window else _OPEN_END
    for county in truths_by_county:
        truths = [t for t in truths_by_county[county] if _clip(t, window)]
        detections = []
        for event in events_by_county.get(county, ()):
            if event.cls not in classes:
                continue
            bounds = _event_bounds(event, default_end)
            if _clip(bounds, window):
                detections.append(bounds)
        matched = any(
            interval_distance(d, t) < buffer_ticks
            for d in detections for t in truths)
        if matched:
            counts.tp += 1
        elif detections:
            counts.fp += 1
        elif truths:
            counts.fn += 1
        else:
            counts.tn += 1
    return counts


def windowed_confusion(events_by_county: Mapping[str, Sequence[OutageEvent]],
                       truths_by_county: Mapping[str, Sequence[tuple[int, int]]],
                       *, duration_ticks: int, window_ticks: int,
                       buffer_ticks: int = DEFAULT_BUFFER_MINUTES,
                       classes: frozenset[FailureClass] = frozenset({FailureClass.POWER}),
                       ) -> list[tuple[tuple[int, int], ConfusionCounts]]:
    """Confusion counts per consecutive window covering [0, duration)."""
    if window_ticks <= 0:
        raise ValueError("window_ticks must be positive")
    out = []
    start = 0
    while start < duration_ticks:
        window = (start, min(start + window_ticks, duration_ticks))
        out.append((window, confusion(
            events_by_county, truths_by_county,
            buffer_ticks=buffer_ticks, window=window, classes=classes)))
        start += window_ticks
    return out


def load_utility_csv(path: str) -> dict[str, GroundTruthSeries]:
    """Read utility-reported truth: county,tick,customers_tracked,customers_out.

    Rows with zero tracked customers carry no signal and are skipped with
    a warning.  Samples are sorted per county; the series ends one tick
    after its last sample.
    """
    raw: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = {"county", "tick", "customers_tracked", "customers_out"}
        if reader.fieldnames is None or not needed <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must contain {sorted(needed)}")
        for lineno, row in enumerate(reader, start=2):
            county = row["county"].strip()
            tick = int(row["tick"])
            tracked = int(row["customers_tracked"])
            out = int(row["customers_out"])
            if tracked <= 0:
                logger.warning("%s:%d: %s has no tracked customers, skipped",
                               path, lineno, county)
                continue
            raw.setdefault(county, []).append((tick, out / tracked))
    series = {}
    for county in sorted(raw):
        samples = sorted(raw[county])
        series[county] = GroundTruthSeries(
            county=county, samples=samples, end_tick=samples[-1][0] + 1,
            source=GroundTruthSource.UTILITY)
    return series


def sim_truth_series(world) -> dict[str, GroundTruthSeries]:
    """Exact truth from a simulator world, sampled at change points only."""
    series = {}
    for county in world.counties:
        samples = [(tick, world.out_fraction(county, tick))
                   for tick in world.power_boundaries(county)
                   if tick < world.duration_ticks]
        series[county] = GroundTruthSeries(
            county=county, samples=samples, end_tick=world.duration_ticks,
            source=GroundTruthSource.SIM)
    return series


# --- report emission ---------------------------------------------------------

def format_report(counts: ConfusionCounts, m: Metrics,
                  header_lines: Iterable[str] = ()) -> str:
    def fmt(value: float | None) -> str:
        return "n/a" if value is None else f"{value:.4f}"

    lines = list(header_lines)
    lines += [
        f"counties evaluated: {counts.total}",
        f"true positives:  {counts.tp}",
        f"false positives: {counts.fp}",
        f"false negatives: {counts.fn}",
        f"true negatives:  {counts.tn}",
        f"accuracy:            {fmt(m.accuracy)}",
        f"false positive rate: {fmt(m.false_positive_rate)}",
        f"false omission rate: {fmt(m.false_omission_rate)}",
    ]
    return "\n".join(lines) + "\n"


def write_report(path: str, counts: ConfusionCounts, m: Metrics,
                 header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report(counts, m, header_lines))


def write_windowed_csv(path: str,
                       rows: list[tuple[tuple[int, int], ConfusionCounts]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_start", "window_end", "tp", "fp", "fn", "tn",
                         "accuracy", "false_positive_rate", "false_omission_rate"])
        for (start, end), counts in rows:
            m = metrics(counts)
            writer.writerow([
                start, end, counts.tp, counts.fp, counts.fn, counts.tn,
                "" if m.accuracy is None else repr(m.accuracy),
                "" if m.false_positive_rate is None else repr(m.false_positive_rate),
                "" if m.false_omission_rate is None else repr(m.false_omission_rate),
            ])
