"""Command line entry points.

    powerwatch simulate --config run.toml
    powerwatch live --config run.toml
    powerwatch evaluate --events out/events.jsonl --truth utility.csv
    powerwatch gen-scenario --out scenario.json --counties 12 ...

Exit codes: 0 success, 1 runtime failure (scanner/backend/data), 2 bad
configuration or usage.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import (EvaluateConfig, RunConfig, RunMode, load_config,
                     validate_for_run, with_overrides)
from .engine import RunSummary, run_evaluate, run_live, run_simulation
from .errors import ConfigError, PowerwatchError
from .evaluation import metrics
from .scenario import random_scenario, save_scenario

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser, *, config_required: bool) -> None:
    parser.add_argument("--config", required=config_required,
                        help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--output-dir", help="override the output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powerwatch",
        description="County-level power outage detection from active probing.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run against a scripted scenario")
    _add_common(p_sim, config_required=True)
    p_sim.add_argument("--scenario", help="override the scenario file")

    p_live = sub.add_parser("live", help="run against an external scanner")
    _add_common(p_live, config_required=True)
    p_live.add_argument("--watchlist", help="override the watchlist file")

    p_eval = sub.add_parser("evaluate",
                            help="score an event log against utility truth")
    _add_common(p_eval, config_required=False)
    p_eval.add_argument("--events", help="event log (JSONL) to score")
    p_eval.add_argument("--truth", help="utility truth CSV")
    p_eval.add_argument("--buffer-minutes", type=int,
                        help="match tolerance between detection and truth")
    p_eval.add_argument("--threshold", type=float,
                        help="outage fraction that counts as truth")
    p_eval.add_argument("--window-ticks", type=int,
                        help="also emit per-window confusion CSVs")

    p_gen = sub.add_parser("gen-scenario", help="write a synthetic scenario")
    p_gen.add_argument("--out", required=True, help="scenario JSON to write")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--counties", type=int, default=12)
    p_gen.add_argument("--ips-per-county", type=int, default=150)
    p_gen.add_argument("--isps", type=int, default=3)
    p_gen.add_argument("--duration", type=int, default=4320,
                       help="run length in ticks (minutes)")
    p_gen.add_argument("--warmup", type=int, default=720,
                       help="injections start after this tick")
    p_gen.add_argument("--power", type=int, default=2,
                       help="number of power injections")
    p_gen.add_argument("--internet", type=int, default=1,
                       help="number of single-ISP injections")
    p_gen.add_argument("--min-fraction", type=float, default=0.65,
                       help="smallest partial power-outage fraction")
    return parser


def _print_summary(summary: RunSummary) -> None:
    print(f"ticks processed: {summary.ticks}")
    print(f"scans: {summary.scans}  probes: {summary.probes}  "
          f"events opened: {summary.events_opened}")
    for tau, counts in sorted(summary.confusion_by_tau.items()):
        m = metrics(counts)
        acc = "n/a" if m.accuracy is None else f"{m.accuracy:.4f}"
        print(f"tau={tau:g}: tp={counts.tp} fp={counts.fp} fn={counts.fn} "
              f"tn={counts.tn} accuracy={acc}")
    print(f"artifacts in {summary.artifacts.output_dir}")


def _eval_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        cfg = with_overrides(cfg, mode=RunMode.EVALUATE, seed=args.seed,
                             output_dir=args.output_dir)
    else:
        cfg = RunConfig(mode=RunMode.EVALUATE,
                        output_dir=args.output_dir or "out")
    patch = {}
    if args.events:
        patch["events"] = args.events
    if args.truth:
        patch["utility_csv"] = args.truth
    if args.buffer_minutes is not None:
        patch["buffer_minutes"] = args.buffer_minutes
    if args.threshold is not None:
        patch["truth_threshold"] = args.threshold
    if args.window_ticks is not None:
        patch["window_ticks"] = args.window_ticks
    if patch:
        cfg = replace(cfg, evaluate=replace(cfg.evaluate, **patch))
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            cfg = with_overrides(load_config(args.config), mode=RunMode.SIMULATE,
                                 seed=args.seed, output_dir=args.output_dir,
                                 scenario=args.scenario)
            validate_for_run(cfg)
            _print_summary(run_simulation(cfg))
        elif args.command == "live":
            cfg = with_overrides(load_config(args.config), mode=RunMode.LIVE,
                                 seed=args.seed, output_dir=args.output_dir,
                                 watchlist=args.watchlist)
            validate_for_run(cfg)
            _print_summary(run_live(cfg))
        elif args.command == "evaluate":
            cfg = _eval_config(args)
            validate_for_run(cfg)
            _print_summary(run_evaluate(cfg))
        elif args.command == "gen-scenario":
            scenario = random_scenario(
                seed=args.seed, n_counties=args.counties,
                ips_per_county=args.ips_per_county, n_isps=args.isps,
                duration_ticks=args.duration, warmup_ticks=args.warmup,
                power_injections=args.power,
                internet_injections=args.internet,
                min_fraction=args.min_fraction)
            save_scenario(scenario, args.out)
            print(f"wrote {args.out}: {args.counties} counties, "
                  f"{len(scenario.ips)} IPs, {len(scenario.injections)} injections")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PowerwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
