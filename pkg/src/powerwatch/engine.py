"""Run orchestration: the scan loop, artifact files, and run modes.

One tick is one simulated (or wall-clock) minute.  Each tick the scheduler
names the scans to run; each scan probes its targets, is assessed for
failure, feeds the per-threshold event trackers, and finally updates
scores unless the gate says the sample is contaminated by an ongoing
failure.  Slow full scans always update scores; they are the mechanism
that re-learns the world, including during outages.

Artifacts written under the output directory:

* ``events.jsonl``   - outage event stream, one JSON record per line;
* ``assessments.csv``- every post-warm-up scan verdict;
* ``scores.csv``     - final score snapshot (plus ``scores-NNNNNN.csv``
  at the configured cadence);
* ``report.txt`` / ``windows-tau-*.csv`` - evaluation outputs;
* ``epoch.json``     - live mode only: wall-clock anchor for tick 0.
"""

from __future__ import annotations

import csv
import json
import logging
import shlex
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .config import RunConfig, RunMode, validate_for_run
from .detector import DetectorConfig, ScanAssessment, assess_scan, threshold_view
from .errors import BackendError, RestoreError
from .evaluation import (ConfusionCounts, confusion, format_report,
                         load_utility_csv, metrics, sim_truth_series,
                         truth_outage_intervals, windowed_confusion,
                         write_windowed_csv)
from .detector import EventTracker
from .model import (FailureClass, IpEntry, OutageEvent, RegionState,
                    ScanKind, ScanResult)
from .prober import ExternalScannerBackend, ProbeRequest, SimWorld
from .rng import tagged_rng
from .scenario import load_scenario, watchlist_entries
from .scheduler import ScanCommand, Scheduler
from .scoring import ScoreStore, is_trackable, reliable_watch_size
from .watchlist import (Blacklist, apply_blacklist, build_rosters,
                        load_blacklist, load_watchlist,
                        sample_reliable_watchlist)

logger = logging.getLogger(__name__)

SCORES_BASENAME = "scores.csv"
EVENTS_BASENAME = "events.jsonl"
ASSESSMENTS_BASENAME = "assessments.csv"
REPORT_BASENAME = "report.txt"
EPOCH_BASENAME = "epoch.json"


# --- score snapshots ----------------------------------------------------------

def snapshot_scores(store: ScoreStore, path: str | Path) -> None:
    """Write address,score,probe_count rows, full float precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["address", "score", "probe_count"])
        for address in sorted(store.addresses()):
            writer.writerow([address, repr(store.score(address)),
                             store.probe_count(address)])


def restore_scores(path: str | Path) -> dict[str, float]:
    """Read a snapshot back as address -> score.

    Raises RestoreError on a missing file, wrong header, or any
    unparseable row; a partial restore would silently skew detection.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise RestoreError(f"cannot open snapshot {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["address", "score"]:
            raise RestoreError(f"{path}: not a score snapshot (header {header})")
        scores: dict[str, float] = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                score = float(row[1])
            except (IndexError, ValueError) as exc:
                raise RestoreError(f"{path}:{lineno}: bad row {row!r}") from exc
            if not 0.0 <= score <= 1.0:
                raise RestoreError(f"{path}:{lineno}: score out of [0,1]: {score}")
            scores[row[0]] = score
    return scores


# --- event log ----------------------------------------------------------------

class EventLogWriter:
    """Append-only JSONL sink for outage event records."""

    def __init__(self, path: str | Path, append: bool = False) -> None:
        self.path = Path(path)
        self._fh = open(self.path, "a" if append else "w", encoding="utf-8")

    def write(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_event_log(path: str | Path) -> list[OutageEvent]:
    """Rebuild events from a log; still-open events keep end_tick None."""
    open_events: dict[tuple[str, float], OutageEvent] = {}
    done: list[OutageEvent] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            key = (rec["county"], rec["tau"])
            kind = rec["kind"]
            if kind == "open":
                open_events[key] = OutageEvent(
                    county=rec["county"],
                    cls=FailureClass(rec["class"]),
                    start_tick=rec["tick"],
                    end_tick=None,
                    tau=rec["tau"],
                    peak_gap=rec["gap"],
                    isp_breakdown=dict(rec.get("isp_breakdown", {})),
                )
            elif kind == "classify":
                event = open_events[key]
                event.cls = FailureClass(rec["class"])
                event.isp_breakdown = dict(rec.get("isp_breakdown", {}))
            elif kind == "close":
                event = open_events.pop(key)
                event.end_tick = rec["tick"]
                event.peak_gap = rec.get("peak_gap", event.peak_gap)
                done.append(event)
            else:
                raise ValueError(f"{path}:{lineno}: unknown record kind {kind!r}")
    done.extend(open_events.values())
    done.sort(key=lambda e: (e.start_tick, e.county, e.tau))
    return done


def events_by_county(events: Iterable[OutageEvent],
                     tau: float | None = None) -> dict[str, list[OutageEvent]]:
    grouped: dict[str, list[OutageEvent]] = {}
    for event in events:
        if tau is not None and event.tau != tau:
            continue
        grouped.setdefault(event.county, []).append(event)
    return grouped


# --- the scan pipeline --------------------------------------------------------

class _AssessmentWriter:
    _FIELDS = ["tick", "county", "scan_kind", "n_samples", "actual_up",
               "expected_up", "gap", "failure", "classification"]

    def __init__(self, path: str | Path, append: bool = False) -> None:
        self.path = Path(path)
        fresh = not (append and self.path.exists() and self.path.stat().st_size)
        self._fh = open(self.path, "a" if append else "w", newline="",
                        encoding="utf-8")
        self._writer = csv.writer(self._fh)
        if fresh:
            self._writer.writerow(self._FIELDS)

    def write(self, a: ScanAssessment, kind: ScanKind) -> None:
        self._writer.writerow([
            a.tick, a.county, kind.value, a.n_samples, repr(a.actual_up),
            repr(a.expected_up), repr(a.gap), int(a.failure),
            a.classification.value,
        ])

    def close(self) -> None:
        self._fh.close()


class Pipeline:
    """Tick processor shared by simulate and live runs."""

    def __init__(self, *, cfg: RunConfig, entries: Sequence[IpEntry],
                 backend, event_writer: EventLogWriter,
                 assessment_writer: _AssessmentWriter | None,
                 restored_scores: dict[str, float] | None = None) -> None:
        self.cfg = cfg
        self.backend = backend
        self.event_writer = event_writer
        self.assessment_writer = assessment_writer
        self.detector_cfg = cfg.detector
        self.warmup_ticks = cfg.engine.warmup_ticks

        self.store = ScoreStore(cfg.scoring.alpha, cfg.scoring.initial_score)
        restored = restored_scores or {}
        for entry in entries:
            self.store.add(entry.address,
                           restored.get(entry.address, entry.initial_score))
        self.rosters = build_rosters(entries)
        self.isp_of: dict[str, str] = {}
        for roster in self.rosters.values():
            self.isp_of.update(roster.isp_of())
        self.states = {county: RegionState(county) for county in self.rosters}
        self.scheduler = Scheduler(
            self.rosters.keys(),
            slow_period=cfg.engine.slow_period_minutes,
            max_commands_per_tick=cfg.engine.max_commands_per_tick or None)
        self.trackers = {
            (county, tau): EventTracker(county, tau)
            for county in self.rosters
            for tau in self.detector_cfg.tau_report
        }
        self.seed = cfg.seed
        self.probes_sent = 0
        self.scans_run = 0
        self.events_opened = 0

    def tracked_counties(self) -> list[str]:
        return [c for c, s in self.states.items() if s.tracked]

    def process_tick(self, tick: int) -> None:
        for command in self.scheduler.on_tick(tick):
            self._run_scan(command, tick)

    def _run_scan(self, command: ScanCommand, tick: int) -> None:
        county, kind = command
        roster = self.rosters[county]
        state = self.states[county]
        if kind is ScanKind.SLOW_FULL:
            targets = roster.addresses
        else:
            rng = tagged_rng(self.seed, f"sample:{county}:{tick}")
            targets = sample_reliable_watchlist(
                roster.addresses, self.store, state.watch_size, rng)
        snapshot = self.store.snapshot(targets)
        outcomes = self.backend.probe(ProbeRequest(tuple(targets), tick))
        self.probes_sent += len(outcomes)
        self.scans_run += 1
        result = ScanResult(county, tick, kind, outcomes, snapshot)

        assessed: ScanAssessment | None = None
        past_warmup = tick >= self.warmup_ticks
        if past_warmup and (kind is ScanKind.FAST_RELIABLE or state.tracked):
            assessed = assess_scan(result, self.detector_cfg, self.isp_of)
            if self.assessment_writer is not None:
                self.assessment_writer.write(assessed, kind)
            self._feed_trackers(assessed, state)
            if self.scheduler.is_tracked(county):
                self.scheduler.on_assessment(county, assessed.failure)

        # Gate: a failing fast scan is evidence of the outage itself, not of
        # the sampled IPs' long-run reliability, so it must not touch scores.
        if kind is ScanKind.SLOW_FULL or assessed is None or not assessed.failure:
            self.store.update_many(outcomes)

        if kind is ScanKind.SLOW_FULL and past_warmup:
            self._resize(county)

    def _feed_trackers(self, assessed: ScanAssessment, state: RegionState) -> None:
        isp_gaps = {name: stats.gap for name, stats in assessed.per_isp.items()}
        for tau in self.detector_cfg.tau_report:
            view = threshold_view(assessed, tau, self.detector_cfg)
            update = self.trackers[(assessed.county, tau)].observe(
                assessed.tick, view, assessed.gap, isp_gaps)
            if update.opened:
                self.events_opened += 1
                self._emit(assessed, state, "open", update.event.cls, tau,
                           isp_breakdown=isp_gaps)
            elif update.reclassified:
                self._emit(assessed, state, "classify", update.event.cls, tau,
                           isp_breakdown=isp_gaps)
            if update.closed is not None:
                self._emit(assessed, state, "close", update.closed.cls, tau,
                           peak_gap=update.closed.peak_gap)

    def _emit(self, assessed: ScanAssessment, state: RegionState, kind: str,
              cls: FailureClass, tau: float, *,
              isp_breakdown: dict[str, float] | None = None,
              peak_gap: float | None = None) -> None:
        record = {
            "tick": assessed.tick,
            "county": assessed.county,
            "kind": kind,
            "class": cls.value,
            "gap": assessed.gap,
            "tau": tau,
            "watch_size": state.watch_size,
        }
        if isp_breakdown is not None:
            record["isp_breakdown"] = isp_breakdown
        if peak_gap is not None:
            record["peak_gap"] = peak_gap
        self.event_writer.write(record)

    def _resize(self, county: str) -> None:
        state = self.states[county]
        rate = self.store.expected_rate(self.rosters[county].addresses)
        state.expected_rate = rate
        trackable = is_trackable(rate)
        if trackable:
            state.watch_size = reliable_watch_size(rate)
        else:
            if state.tracked:
                logger.warning("%s: expected rate %.2f fell below cutoff, untracking",
                               county, rate)
            state.watch_size = 0
        state.tracked = trackable
        self.scheduler.set_tracked(county, trackable)


# --- run modes ----------------------------------------------------------------

@dataclass
class RunArtifacts:
    output_dir: Path
    events: Path
    assessments: Path
    scores: Path
    report: Path | None = None


@dataclass
class RunSummary:
    ticks: int
    scans: int
    probes: int
    events_opened: int
    artifacts: RunArtifacts
    confusion_by_tau: dict[float, ConfusionCounts] = field(default_factory=dict)


def _load_entries(cfg: RunConfig, scenario=None) -> list[IpEntry]:
    if cfg.watchlist:
        entries = load_watchlist(cfg.watchlist).entries
    elif scenario is not None:
        entries = watchlist_entries(scenario, cfg.seed_scores_from_base_p)
    else:
        raise RestoreError("no watchlist source")  # unreachable after validate
    if cfg.blacklist:
        blacklist = load_blacklist(cfg.blacklist)
        entries, removed = apply_blacklist(entries, blacklist)
        if removed:
            logger.info("blacklist removed %d of %d entries",
                        len(removed), len(removed) + len(entries))
    return entries


class SimulationRun:
    """A full simulate-mode run; step() is exposed for instrumented tests."""

    def __init__(self, cfg: RunConfig, scenario=None,
                 entries: Sequence[IpEntry] | None = None) -> None:
        if cfg.mode is None:
            from dataclasses import replace
            cfg = replace(cfg, mode=RunMode.SIMULATE)
        if scenario is None:
            validate_for_run(cfg)
            scenario = load_scenario(cfg.scenario)
        else:
            from .scenario import validate_scenario
            validate_scenario(scenario)
        self.cfg = cfg
        self.scenario = scenario
        self.world = SimWorld(scenario)
        if entries is None:
            entries = _load_entries(cfg, scenario)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.artifacts = RunArtifacts(
            output_dir=out,
            events=out / EVENTS_BASENAME,
            assessments=out / ASSESSMENTS_BASENAME,
            scores=out / SCORES_BASENAME,
            report=out / REPORT_BASENAME,
        )
        self._event_writer = EventLogWriter(self.artifacts.events)
        self._assessment_writer = _AssessmentWriter(self.artifacts.assessments)
        self.pipeline = Pipeline(
            cfg=cfg, entries=entries, backend=self.world,
            event_writer=self._event_writer,
            assessment_writer=self._assessment_writer)
        self.duration_ticks = scenario.duration_ticks
        self.tick = 0

    @property
    def store(self) -> ScoreStore:
        return self.pipeline.store

    def step(self) -> None:
        self.pipeline.process_tick(self.tick)
        cadence = self.cfg.engine.snapshot_every_ticks
        if cadence and self.tick and self.tick % cadence == 0:
            snapshot_scores(self.store,
                            self.artifacts.output_dir / f"scores-{self.tick:06d}.csv")
        self.tick += 1

    def run(self) -> RunSummary:
        try:
            while self.tick < self.duration_ticks:
                self.step()
        finally:
            self._event_writer.close()
            self._assessment_writer.close()
            snapshot_scores(self.store, self.artifacts.scores)
        confusion_by_tau = self._evaluate_against_truth()
        return RunSummary(
            ticks=self.tick,
            scans=self.pipeline.scans_run,
            probes=self.pipeline.probes_sent,
            events_opened=self.pipeline.events_opened,
            artifacts=self.artifacts,
            confusion_by_tau=confusion_by_tau,
        )

    def _evaluate_against_truth(self) -> dict[float, ConfusionCounts]:
        """Score the run against the scenario's exact power truth."""
        ecfg = self.cfg.evaluate
        series = sim_truth_series(self.world)
        tracked = sorted(self.pipeline.tracked_counties())
        truths = {c: truth_outage_intervals(series[c], ecfg.truth_threshold)
                  for c in tracked}
        events = read_event_log(self.artifacts.events)
        events = [e for e in events if e.county in truths]
        by_tau: dict[float, ConfusionCounts] = {}
        sections: list[str] = []
        for tau in self.cfg.detector.tau_report:
            grouped = events_by_county(events, tau)
            counts = confusion(grouped, truths,
                               buffer_ticks=ecfg.buffer_minutes)
            by_tau[tau] = counts
            sections.append(format_report(
                counts, metrics(counts),
                header_lines=[f"-- threshold tau={tau:g} --"]))
            if ecfg.window_ticks:
                rows = windowed_confusion(
                    grouped, truths, duration_ticks=self.duration_ticks,
                    window_ticks=ecfg.window_ticks,
                    buffer_ticks=ecfg.buffer_minutes)
                write_windowed_csv(
                    self.artifacts.output_dir / f"windows-tau-{tau:g}.csv", rows)
        with open(self.artifacts.report, "w", encoding="utf-8") as fh:
            fh.write("\n".join(sections))
        return by_tau


def run_simulation(cfg: RunConfig) -> RunSummary:
    return SimulationRun(cfg).run()


class LiveRun:
    """Wall-clock run against a real scanner.

    Tick 0 is anchored at the first start and persisted in epoch.json;
    restarting with the same output directory resumes the tick line and
    the last score snapshot instead of starting a new history.
    """

    def __init__(self, cfg: RunConfig, backend=None,
                 clock: Callable[[], float] = time.time,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        validate_for_run(cfg)
        self.cfg = cfg
        self.clock = clock
        self.sleep = sleep
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.artifacts = RunArtifacts(
            output_dir=out,
            events=out / EVENTS_BASENAME,
            assessments=out / ASSESSMENTS_BASENAME,
            scores=out / SCORES_BASENAME,
        )
        epoch_path = out / EPOCH_BASENAME
        restored: dict[str, float] | None = None
        resuming = epoch_path.exists()
        if resuming:
            with open(epoch_path, encoding="utf-8") as fh:
                anchor = json.load(fh)
            self.epoch = float(anchor["started_unix"])
            self.tick_minutes = int(anchor["tick_minutes"])
            if self.tick_minutes != cfg.live.tick_minutes:
                raise RestoreError(
                    f"epoch.json pins tick_minutes={self.tick_minutes}, "
                    f"config says {cfg.live.tick_minutes}")
            if self.artifacts.scores.exists():
                restored = restore_scores(self.artifacts.scores)
                logger.info("resumed %d scores from %s",
                            len(restored), self.artifacts.scores)
        else:
            self.epoch = self.clock()
            self.tick_minutes = cfg.live.tick_minutes
            with open(epoch_path, "w", encoding="utf-8") as fh:
                json.dump({"started_unix": self.epoch,
                           "tick_minutes": self.tick_minutes}, fh)
                fh.write("\n")

        if backend is None:
            backend = ExternalScannerBackend(
                shlex.split(cfg.live.scanner_command),
                rate_cap=cfg.live.rate_cap or None,
                probe_timeout_s=cfg.live.probe_timeout_s,
                wall_timeout_s=cfg.live.wall_timeout_s)
        self._event_writer = EventLogWriter(self.artifacts.events, append=resuming)
        self._assessment_writer = _AssessmentWriter(
            self.artifacts.assessments, append=resuming)
        self.pipeline = Pipeline(
            cfg=cfg, entries=_load_entries(cfg), backend=backend,
            event_writer=self._event_writer,
            assessment_writer=self._assessment_writer,
            restored_scores=restored)
        self.next_tick = self._due_tick()

    def _due_tick(self) -> int:
        return max(0, int((self.clock() - self.epoch) // (60 * self.tick_minutes)))

    def run(self) -> RunSummary:
        processed = 0
        max_ticks = self.cfg.live.max_ticks
        try:
            while not max_ticks or processed < max_ticks:
                due = self._due_tick()
                if due < self.next_tick:
                    target = self.epoch + self.next_tick * 60 * self.tick_minutes
                    self.sleep(max(0.0, target - self.clock()))
                    continue
                self.next_tick = max(self.next_tick, due)
                self.pipeline.process_tick(self.next_tick)
                cadence = self.cfg.engine.snapshot_every_ticks
                if cadence and self.next_tick % cadence == 0:
                    snapshot_scores(self.pipeline.store, self.artifacts.scores)
                self.next_tick += 1
                processed += 1
        finally:
            # Flush state even on BackendError so a restart can resume.
            self._event_writer.close()
            self._assessment_writer.close()
            snapshot_scores(self.pipeline.store, self.artifacts.scores)
        return RunSummary(
            ticks=processed,
            scans=self.pipeline.scans_run,
            probes=self.pipeline.probes_sent,
            events_opened=self.pipeline.events_opened,
            artifacts=self.artifacts,
        )


def run_live(cfg: RunConfig, backend=None, clock=time.time,
             sleep=time.sleep) -> RunSummary:
    return LiveRun(cfg, backend=backend, clock=clock, sleep=sleep).run()


def run_evaluate(cfg: RunConfig) -> RunSummary:
    """Score an existing event log against utility-reported truth."""
    validate_for_run(cfg)
    ecfg = cfg.evaluate
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        events = read_event_log(ecfg.events)
        series = load_utility_csv(ecfg.utility_csv)
    except (OSError, ValueError, KeyError) as exc:
        raise RestoreError(f"cannot read evaluation inputs: {exc}") from exc
    truths = {county: truth_outage_intervals(s, ecfg.truth_threshold)
              for county, s in sorted(series.items())}
    dropped = sorted({e.county for e in events} - set(truths))
    if dropped:
        logger.warning("no utility truth for %d counties, ignored: %s",
                       len(dropped), ", ".join(dropped[:5]))
        events = [e for e in events if e.county in truths]

    taus = sorted({e.tau for e in events}) or list(cfg.detector.tau_report)
    duration = max([s.end_tick for s in series.values()] +
                   [e.end_tick or e.start_tick + 1 for e in events], default=0)
    by_tau: dict[float, ConfusionCounts] = {}
    sections: list[str] = []
    for tau in taus:
        grouped = events_by_county(events, tau)
        counts = confusion(grouped, truths, buffer_ticks=ecfg.buffer_minutes)
        by_tau[tau] = counts
        sections.append(format_report(
            counts, metrics(counts), header_lines=[f"-- threshold tau={tau:g} --"]))
        if ecfg.window_ticks:
            rows = windowed_confusion(
                grouped, truths, duration_ticks=duration,
                window_ticks=ecfg.window_ticks, buffer_ticks=ecfg.buffer_minutes)
            write_windowed_csv(out / f"windows-tau-{tau:g}.csv", rows)
    report = out / REPORT_BASENAME
    with open(report, "w", encoding="utf-8") as fh:
        fh.write("\n".join(sections))
    artifacts = RunArtifacts(
        output_dir=out, events=Path(ecfg.events),
        assessments=out / ASSESSMENTS_BASENAME, scores=out / SCORES_BASENAME,
        report=report)
    return RunSummary(ticks=duration, scans=0, probes=0,
                      events_opened=len(events), artifacts=artifacts,
                      confusion_by_tau=by_tau)
