"""Run configuration: TOML loading, validation, CLI overrides.

Paths in a config file are resolved relative to the file itself, so a
config directory can be moved wholesale.  Unknown sections or keys are
rejected rather than ignored; silent typos in threshold names are worse
than a hard error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .detector import DetectorConfig
from .errors import ConfigError
from .scoring import DEFAULT_ALPHA, DEFAULT_INITIAL_SCORE


class RunMode(Enum):
    SIMULATE = "simulate"
    LIVE = "live"
    EVALUATE = "evaluate"


@dataclass(frozen=True)
class ScoringConfig:
    alpha: float = DEFAULT_ALPHA
    initial_score: float = DEFAULT_INITIAL_SCORE


@dataclass(frozen=True)
class EngineConfig:
    warmup_ticks: int = 720
    slow_period_minutes: int = 360
    snapshot_every_ticks: int = 0   # 0: final snapshot only
    max_commands_per_tick: int = 0  # 0: uncapped


@dataclass(frozen=True)
class LiveConfig:
    scanner_command: str = ""
    rate_cap: int = 0               # probes/sec passed to the scanner; 0: none
    probe_timeout_s: float = 5.0
    wall_timeout_s: float = 900.0
    tick_minutes: int = 1
    max_ticks: int = 0              # 0: run until interrupted


@dataclass(frozen=True)
class EvaluateConfig:
    events: str = ""
    utility_csv: str = ""
    buffer_minutes: int = 360
    truth_threshold: float = 0.5
    window_ticks: int = 0           # 0: single whole-run window


@dataclass(frozen=True)
class RunConfig:
    mode: RunMode | None = None
    seed: int = 0
    output_dir: str = "out"
    watchlist: str = ""
    blacklist: str = ""
    scenario: str = ""
    seed_scores_from_base_p: bool = False  # simulate only
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    live: LiveConfig = field(default_factory=LiveConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)


def _take(table: Mapping[str, Any], where: str, spec: dict[str, type | tuple[type, ...]],
          ) -> dict[str, Any]:
    unknown = set(table) - set(spec)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    out: dict[str, Any] = {}
    for key, want in spec.items():
        if key not in table:
            continue
        value = table[key]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, want) or isinstance(value, bool) and want is not bool:
            raise ConfigError(f"{where}.{key}: expected {want}, got {type(value).__name__}")
        out[key] = value
    return out


def _resolve(base: Path, value: str) -> str:
    if not value:
        return value
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def load_config(path: str | Path) -> RunConfig:
    """Parse and structurally validate a TOML run config."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.resolve().parent

    sections = {"detector", "scoring", "engine", "live", "evaluate"}
    top = {k: v for k, v in doc.items() if k not in sections}
    top_vals = _take(top, str(path), {
        "mode": str, "seed": int, "output_dir": str, "watchlist": str,
        "blacklist": str, "scenario": str, "seed_scores_from_base_p": bool,
    })
    mode: RunMode | None = None
    if "mode" in top_vals:
        try:
            mode = RunMode(top_vals["mode"])
        except ValueError:
            raise ConfigError(
                f"{path}: mode must be one of "
                f"{[m.value for m in RunMode]}, got {top_vals['mode']!r}") from None

    det_vals = _take(doc.get("detector", {}), "detector", {
        "tau_gate": float, "ewma_bias": float, "tau_report": list,
        "min_isp_samples": int,
    })
    if "tau_report" in det_vals:
        taus = det_vals["tau_report"]
        if not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in taus):
            raise ConfigError("detector.tau_report: expected a list of numbers")
        det_vals["tau_report"] = tuple(float(t) for t in taus)
    try:
        detector = DetectorConfig(**det_vals)
    except ValueError as exc:
        raise ConfigError(f"detector: {exc}") from exc

    scoring_vals = _take(doc.get("scoring", {}), "scoring",
                         {"alpha": float, "initial_score": float})
    engine_vals = _take(doc.get("engine", {}), "engine", {
        "warmup_ticks": int, "slow_period_minutes": int,
        "snapshot_every_ticks": int, "max_commands_per_tick": int,
    })
    live_vals = _take(doc.get("live", {}), "live", {
        "scanner_command": str, "rate_cap": int, "probe_timeout_s": float,
        "wall_timeout_s": float, "tick_minutes": int, "max_ticks": int,
    })
    eval_vals = _take(doc.get("evaluate", {}), "evaluate", {
        "events": str, "utility_csv": str, "buffer_minutes": int,
        "truth_threshold": float, "window_ticks": int,
    })
    for key in ("events", "utility_csv"):
        if key in eval_vals:
            eval_vals[key] = _resolve(base, eval_vals[key])

    return RunConfig(
        mode=mode,
        seed=top_vals.get("seed", 0),
        output_dir=_resolve(base, top_vals.get("output_dir", "out")),
        watchlist=_resolve(base, top_vals.get("watchlist", "")),
        blacklist=_resolve(base, top_vals.get("blacklist", "")),
        scenario=_resolve(base, top_vals.get("scenario", "")),
        seed_scores_from_base_p=top_vals.get("seed_scores_from_base_p", False),
        detector=detector,
        scoring=ScoringConfig(**scoring_vals),
        engine=EngineConfig(**engine_vals),
        live=LiveConfig(**live_vals),
        evaluate=EvaluateConfig(**eval_vals),
    )


def with_overrides(cfg: RunConfig, *, mode: RunMode | None = None,
                   seed: int | None = None, output_dir: str | None = None,
                   scenario: str | None = None,
                   watchlist: str | None = None) -> RunConfig:
    """Apply CLI overrides; the subcommand's mode wins over the file's."""
    if mode is not None:
        if cfg.mode is not None and cfg.mode is not mode:
            raise ConfigError(
                f"config says mode={cfg.mode.value} but the "
                f"{mode.value} command was invoked")
        cfg = replace(cfg, mode=mode)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if output_dir is not None:
        cfg = replace(cfg, output_dir=output_dir)
    if scenario is not None:
        cfg = replace(cfg, scenario=scenario)
    if watchlist is not None:
        cfg = replace(cfg, watchlist=watchlist)
    return cfg


def validate_for_run(cfg: RunConfig) -> None:
    """Check mode-specific requirements before a run starts."""
    if cfg.mode is None:
        raise ConfigError("no mode selected")
    if not 0.0 < cfg.scoring.alpha < 1.0:
        raise ConfigError(f"scoring.alpha out of (0,1): {cfg.scoring.alpha}")
    if not 0.0 <= cfg.scoring.initial_score <= 1.0:
        raise ConfigError(
            f"scoring.initial_score out of [0,1]: {cfg.scoring.initial_score}")
    if cfg.engine.warmup_ticks < 0:
        raise ConfigError("engine.warmup_ticks must be >= 0")
    if cfg.engine.slow_period_minutes <= 0:
        raise ConfigError("engine.slow_period_minutes must be positive")
    if cfg.engine.snapshot_every_ticks < 0:
        raise ConfigError("engine.snapshot_every_ticks must be >= 0")
    if cfg.engine.max_commands_per_tick < 0:
        raise ConfigError("engine.max_commands_per_tick must be >= 0")
    if cfg.mode is RunMode.SIMULATE:
        if not cfg.scenario:
            raise ConfigError("simulate mode needs a scenario file")
    elif cfg.mode is RunMode.LIVE:
        if not cfg.watchlist:
            raise ConfigError("live mode needs a watchlist file")
        if not cfg.live.scanner_command.strip():
            raise ConfigError("live mode needs live.scanner_command")
        if cfg.live.tick_minutes < 1:
            raise ConfigError("live.tick_minutes must be >= 1")
    elif cfg.mode is RunMode.EVALUATE:
        if not cfg.evaluate.events:
            raise ConfigError("evaluate mode needs evaluate.events")
        if not cfg.evaluate.utility_csv:
            raise ConfigError("evaluate mode needs evaluate.utility_csv")
        if cfg.evaluate.buffer_minutes < 0:
            raise ConfigError("evaluate.buffer_minutes must be >= 0")
        if not 0.0 < cfg.evaluate.truth_threshold <= 1.0:
            raise ConfigError("evaluate.truth_threshold out of (0,1]")
