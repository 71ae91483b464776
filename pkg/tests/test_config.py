"""Config loading, strict key checking, overrides, per-mode validation."""

import pytest

from powerwatch.config import (RunConfig, RunMode, load_config,
                               validate_for_run, with_overrides)
from powerwatch.errors import ConfigError

FULL = """
mode = "simulate"
seed = 99
output_dir = "results"
scenario = "world.json"
blacklist = "deny.txt"
seed_scores_from_base_p = true

[detector]
tau_gate = 0.05
ewma_bias = 0.0
tau_report = [0.2, 0.3]
min_isp_samples = 4

[scoring]
alpha = 0.02
initial_score = 0.6

[engine]
warmup_ticks = 360
slow_period_minutes = 180
snapshot_every_ticks = 100
max_commands_per_tick = 40

[live]
scanner_command = "scan --quiet"
rate_cap = 2000
probe_timeout_s = 3.5
tick_minutes = 2
max_ticks = 10

[evaluate]
events = "events.jsonl"
utility_csv = "truth.csv"
buffer_minutes = 120
truth_threshold = 0.4
window_ticks = 1440
"""


def write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_load_full_config(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    assert cfg.mode is RunMode.SIMULATE
    assert cfg.seed == 99
    # relative paths resolve against the config file's directory
    assert cfg.output_dir == str(tmp_path / "results")
    assert cfg.scenario == str(tmp_path / "world.json")
    assert cfg.evaluate.events == str(tmp_path / "events.jsonl")
    assert cfg.detector.tau_report == (0.2, 0.3)
    assert cfg.detector.min_isp_samples == 4
    assert cfg.scoring.alpha == 0.02
    assert cfg.engine.slow_period_minutes == 180
    assert cfg.live.scanner_command == "scan --quiet"
    assert cfg.live.tick_minutes == 2
    assert cfg.evaluate.truth_threshold == 0.4
    assert cfg.seed_scores_from_base_p is True


def test_defaults_for_empty_config(tmp_path):
    cfg = load_config(write(tmp_path, ""))
    assert cfg.mode is None
    assert cfg.detector.tau_gate == 0.07
    assert cfg.detector.ewma_bias == 0.07
    assert cfg.detector.tau_report == (0.3,)
    assert cfg.scoring.alpha == 0.01
    assert cfg.engine.warmup_ticks == 720
    assert cfg.engine.slow_period_minutes == 360
    assert cfg.evaluate.buffer_minutes == 360
    assert cfg.evaluate.truth_threshold == 0.5


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(write(tmp_path, "sede = 3\n"))
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(write(tmp_path, "[detector]\ntau_gaet = 0.1\n"))


def test_type_errors_rejected(tmp_path):
    with pytest.raises(ConfigError, match="seed"):
        load_config(write(tmp_path, 'seed = "nine"\n'))
    with pytest.raises(ConfigError, match="tau_report"):
        load_config(write(tmp_path, '[detector]\ntau_report = ["high"]\n'))
    with pytest.raises(ConfigError, match="mode"):
        load_config(write(tmp_path, 'mode = "turbo"\n'))


def test_bad_toml_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "mode = [unclosed\n"))
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_detector_values_validated(tmp_path):
    with pytest.raises(ConfigError, match="tau_gate"):
        load_config(write(tmp_path, "[detector]\ntau_gate = -1.0\n"))


def test_overrides_and_mode_conflict(tmp_path):
    cfg = load_config(write(tmp_path, 'mode = "simulate"\nseed = 1\n'))
    cfg2 = with_overrides(cfg, mode=RunMode.SIMULATE, seed=7, output_dir="/x")
    assert cfg2.seed == 7 and cfg2.output_dir == "/x"
    with pytest.raises(ConfigError, match="mode"):
        with_overrides(cfg, mode=RunMode.LIVE)


def test_validate_for_run_per_mode():
    with pytest.raises(ConfigError, match="no mode"):
        validate_for_run(RunConfig())
    with pytest.raises(ConfigError, match="scenario"):
        validate_for_run(RunConfig(mode=RunMode.SIMULATE))
    with pytest.raises(ConfigError, match="watchlist"):
        validate_for_run(RunConfig(mode=RunMode.LIVE))
    from dataclasses import replace
    live = RunConfig(mode=RunMode.LIVE, watchlist="w.csv")
    with pytest.raises(ConfigError, match="scanner_command"):
        validate_for_run(live)
    with pytest.raises(ConfigError, match="events"):
        validate_for_run(RunConfig(mode=RunMode.EVALUATE))
    ev = RunConfig(mode=RunMode.EVALUATE)
    ev = replace(ev, evaluate=replace(ev.evaluate, events="e", utility_csv="u",
                                      truth_threshold=0.0))
    with pytest.raises(ConfigError, match="truth_threshold"):
        validate_for_run(ev)


def test_validate_for_run_engine_bounds():
    from dataclasses import replace
    cfg = RunConfig(mode=RunMode.SIMULATE, scenario="s.json")
    validate_for_run(cfg)  # fine
    bad = replace(cfg, engine=replace(cfg.engine, warmup_ticks=-1))
    with pytest.raises(ConfigError, match="warmup"):
        validate_for_run(bad)
    bad = replace(cfg, scoring=replace(cfg.scoring, alpha=1.0))
    with pytest.raises(ConfigError, match="alpha"):
        validate_for_run(bad)
