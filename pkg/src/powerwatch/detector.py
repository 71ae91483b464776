"""Failure detection: gap assessment, ISP disambiguation, event tracking.

For each scan the detector compares the mean score of the sampled IPs
(what should have answered) against the fraction that actually answered.
Scores run high relative to live response rates, so a fixed bias is
subtracted from the expectation first:

    gap = (E - bias) - U

A gap above the gate threshold marks the scan as failing, which freezes
score updates for the region and speeds up its scan schedule.  Events
worth reporting are tracked at separate, higher thresholds so that probe
noise near the gate never surfaces as an outage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import EmptyScan
from .model import FailureClass, OutageEvent, ScanResult

DEFAULT_TAU_GATE = 0.07
DEFAULT_EWMA_BIAS = 0.07
DEFAULT_TAU_REPORT = (0.3,)
DEFAULT_MIN_ISP_SAMPLES = 5

# POWER outranks INTERNET outranks UNCLASSIFIED when an open event is
# re-classified mid-flight; downgrades are ignored.
_CLASS_STRENGTH = {
    FailureClass.NONE: 0,
    FailureClass.UNCLASSIFIED: 1,
    FailureClass.INTERNET: 2,
    FailureClass.POWER: 3,
}


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds for failure detection and classification.

    tau_gate drives score gating and scan-schedule adaptation;
    tau_report lists the thresholds at which outage events are opened
    and logged.  min_isp_samples is the least sampled IPs an ISP needs
    before its per-ISP gap is trusted for classification.
    """

    tau_gate: float = DEFAULT_TAU_GATE
    ewma_bias: float = DEFAULT_EWMA_BIAS
    tau_report: tuple[float, ...] = DEFAULT_TAU_REPORT
    min_isp_samples: int = DEFAULT_MIN_ISP_SAMPLES

    def __post_init__(self) -> None:
        if self.tau_gate <= 0.0:
            raise ValueError("tau_gate must be positive")
        if not self.tau_report:
            raise ValueError("tau_report must list at least one threshold")
        if any(t <= 0.0 for t in self.tau_report):
            raise ValueError("report thresholds must be positive")
        if self.min_isp_samples < 1:
            raise ValueError("min_isp_samples must be >= 1")


@dataclass(frozen=True)
class IspStats:
    """Per-ISP slice of one scan assessment."""

    isp: str
    n_samples: int
    actual_up: float
    expected_up: float
    gap: float


@dataclass(frozen=True)
class ScanAssessment:
    """Region-level verdict for one scan."""

    county: str
    tick: int
    n_samples: int
    actual_up: float    # U: fraction of sampled IPs that responded
    expected_up: float  # E: mean sampled score at selection time
    gap: float          # (E - bias) - U
    failure: bool       # gap > tau_gate
    classification: FailureClass
    per_isp: dict[str, IspStats] = field(default_factory=dict)


def classify_failure(per_isp: Mapping[str, tuple[float, int]],
                     cfg: DetectorConfig,
                     tau: float | None = None) -> FailureClass:
    """Attribute a failing scan to power loss or an ISP problem.

    ``per_isp`` maps ISP name to (gap, n_samples).  Only ISPs with at
    least cfg.min_isp_samples sampled IPs qualify.  With fewer than two
    qualifying ISPs there is nothing to compare, so the failure stays
    UNCLASSIFIED.  POWER requires every qualifying ISP to exceed the
    threshold; a split between failing and healthy ISPs is INTERNET.
    """
    if tau is None:
        tau = cfg.tau_gate
    qualified = {isp: gap for isp, (gap, n) in per_isp.items()
                 if n >= cfg.min_isp_samples}
    if len(qualified) < 2:
        return FailureClass.UNCLASSIFIED
    exceeding = sum(1 for gap in qualified.values() if gap > tau)
    if exceeding == len(qualified):
        return FailureClass.POWER
    if exceeding > 0:
        return FailureClass.INTERNET
    return FailureClass.UNCLASSIFIED


def assess_scan(result: ScanResult, cfg: DetectorConfig,
                isp_of: Mapping[str, str]) -> ScanAssessment:
    """Assess one scan at the gate threshold.

    ``isp_of`` maps every scanned address to its ISP (scan results do not
    carry ISP labels).  Raises EmptyScan if the scan has no outcomes.
    """
    if not result.outcomes:
        raise EmptyScan(f"{result.county}@{result.tick}: scan has no outcomes")
    if not result.sampled_scores:
        raise EmptyScan(f"{result.county}@{result.tick}: scan has no score snapshot")

    responded = sum(1 for o in result.outcomes if o.responded)
    actual = responded / len(result.outcomes)
    expected = sum(result.sampled_scores.values()) / len(result.sampled_scores)
    gap = (expected - cfg.ewma_bias) - actual
    failure = gap > cfg.tau_gate

    by_isp_hits: dict[str, list[bool]] = {}
    for outcome in result.outcomes:
        by_isp_hits.setdefault(isp_of[outcome.address], []).append(outcome.responded)
    by_isp_scores: dict[str, list[float]] = {}
    for address, score in result.sampled_scores.items():
        by_isp_scores.setdefault(isp_of[address], []).append(score)

    per_isp: dict[str, IspStats] = {}
    for isp in sorted(by_isp_hits):
        hits = by_isp_hits[isp]
        scores = by_isp_scores.get(isp, [])
        isp_actual = sum(hits) / len(hits)
        isp_expected = sum(scores) / len(scores) if scores else 0.0
        per_isp[isp] = IspStats(
            isp=isp,
            n_samples=len(hits),
            actual_up=isp_actual,
            expected_up=isp_expected,
            gap=(isp_expected - cfg.ewma_bias) - isp_actual,
        )

    classification = FailureClass.NONE
    if failure:
        classification = classify_failure(
            {s.isp: (s.gap, s.n_samples) for s in per_isp.values()}, cfg)

    return ScanAssessment(
        county=result.county,
        tick=result.tick,
        n_samples=len(result.outcomes),
        actual_up=actual,
        expected_up=expected,
        gap=gap,
        failure=failure,
        classification=classification,
        per_isp=per_isp,
    )


@dataclass(frozen=True)
class ThresholdView:
    """One assessment re-judged at a report threshold."""

    tau: float
    failing: bool
    classification: FailureClass


def threshold_view(assessment: ScanAssessment, tau: float,
                   cfg: DetectorConfig) -> ThresholdView:
    """Re-evaluate an assessment's gap and classification at ``tau``."""
    failing = assessment.gap > tau
    cls = FailureClass.NONE
    if failing:
        cls = classify_failure(
            {s.isp: (s.gap, s.n_samples) for s in assessment.per_isp.values()},
            cfg, tau=tau)
    return ThresholdView(tau=tau, failing=failing, classification=cls)


@dataclass(frozen=True)
class TrackerUpdate:
    """What one observation did to the event stream."""

    opened: bool
    closed: OutageEvent | None
    reclassified: bool
    event: OutageEvent | None  # the open event after this observation


class EventTracker:
    """Folds per-scan verdicts into contiguous outage events.

    One tracker per (county, report threshold).  An event opens on the
    first failing scan, absorbs subsequent failing scans (keeping peak
    gap and the strongest classification), and closes half-open at the
    first non-failing scan.
    """

    def __init__(self, county: str, tau: float) -> None:
        self.county = county
        self.tau = tau
        self.open_event: OutageEvent | None = None

    def observe(self, tick: int, view: ThresholdView, gap: float,
                isp_gaps: Mapping[str, float]) -> TrackerUpdate:
        if view.failing:
            if self.open_event is None:
                self.open_event = OutageEvent(
                    county=self.county,
                    cls=view.classification,
                    start_tick=tick,
                    end_tick=None,
                    tau=self.tau,
                    peak_gap=gap,
                    isp_breakdown=dict(isp_gaps),
                )
                return TrackerUpdate(True, None, False, self.open_event)
            event = self.open_event
            reclassified = False
            if _CLASS_STRENGTH[view.classification] > _CLASS_STRENGTH[event.cls]:
                event.cls = view.classification
                event.isp_breakdown = dict(isp_gaps)
                reclassified = True
            if gap > event.peak_gap:
                event.peak_gap = gap
            return TrackerUpdate(False, None, reclassified, event)

        if self.open_event is not None:
            closed = self.open_event
            closed.end_tick = tick
            self.open_event = None
            return TrackerUpdate(False, closed, False, None)
        return TrackerUpdate(False, None, False, None)
