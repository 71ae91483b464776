"""CLI tests: subcommands wired end to end through main()."""

import json
import sys

import pytest

from powerwatch.cli import main
from powerwatch.scenario import load_scenario


def test_gen_scenario_writes_loadable_file(tmp_path, capsys):
    out = tmp_path / "scn.json"
    rc = main(["gen-scenario", "--out", str(out), "--seed", "3",
               "--counties", "4", "--ips-per-county", "30", "--isps", "2",
               "--duration", "3000", "--warmup", "600",
               "--power", "1", "--internet", "1"])
    assert rc == 0
    scenario = load_scenario(str(out))
    assert len(scenario.ips) == 120
    assert len(scenario.injections) == 2
    assert "wrote" in capsys.readouterr().out


def test_simulate_subcommand_runs_config(tmp_path, capsys):
    scn = tmp_path / "scn.json"
    assert main(["gen-scenario", "--out", str(scn), "--seed", "11",
                 "--counties", "3", "--ips-per-county", "40", "--isps", "2",
                 "--duration", "1500", "--warmup", "360",
                 "--power", "1", "--internet", "0"]) == 0
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'seed = 11\n'
        'output_dir = "out"\n'
        'scenario = "scn.json"\n'
        'seed_scores_from_base_p = true\n'
        '[detector]\n'
        'ewma_bias = 0.0\n'
        '[engine]\n'
        'warmup_ticks = 360\n'
        'slow_period_minutes = 180\n')
    rc = main(["simulate", "--config", str(cfg)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "ticks processed: 1500" in out
    assert (tmp_path / "out" / "events.jsonl").exists()
    assert (tmp_path / "out" / "report.txt").exists()
    assert (tmp_path / "out" / "scores.csv").exists()


def test_simulate_missing_scenario_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("seed = 1\n")
    rc = main(["simulate", "--config", str(cfg)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_mode_conflict_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('mode = "live"\nscenario = "x.json"\n')
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_evaluate_with_direct_flags(tmp_path, capsys):
    events = tmp_path / "events.jsonl"
    events.write_text(json.dumps({
        "tick": 100, "county": "adams", "kind": "open", "class": "power",
        "gap": 0.5, "tau": 0.3, "watch_size": 25}) + "\n")
    truth = tmp_path / "truth.csv"
    truth.write_text("county,tick,customers_tracked,customers_out\n"
                     "adams,100,50,45\nadams,300,50,0\n")
    rc = main(["evaluate", "--events", str(events), "--truth", str(truth),
               "--output-dir", str(tmp_path / "eval")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "tau=0.3: tp=1" in out
    assert (tmp_path / "eval" / "report.txt").exists()


def test_evaluate_missing_truth_is_config_error(tmp_path, capsys):
    rc = main(["evaluate", "--events", str(tmp_path / "e.jsonl")])
    assert rc == 2


def test_evaluate_bad_events_file_is_runtime_error(tmp_path, capsys):
    truth = tmp_path / "truth.csv"
    truth.write_text("county,tick,customers_tracked,customers_out\n"
                     "adams,0,10,0\n")
    rc = main(["evaluate", "--events", str(tmp_path / "missing.jsonl"),
               "--truth", str(truth)])
    assert rc == 1


def test_live_subcommand_with_stub_scanner(tmp_path, capsys):
    # a scanner that answers "up" for every target
    script = tmp_path / "scanner.py"
    script.write_text(
        "import sys\n"
        "args = sys.argv[1:]\n"
        "path = args[args.index('--targets') + 1]\n"
        "for line in open(path):\n"
        "    line = line.strip()\n"
        "    if line:\n"
        "        print(line, 1)\n")
    watch = tmp_path / "watch.csv"
    rows = ["address,county,isp"]
    rows += [f"10.8.0.{i},adams,isp{i % 2}" for i in range(25)]
    watch.write_text("\n".join(rows) + "\n")
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'watchlist = "watch.csv"\n'
        'output_dir = "live-out"\n'
        f'[live]\nscanner_command = "{sys.executable} {script}"\n'
        'max_ticks = 1\n'  # one tick: more would wall-clock sleep to tick 2
        '[engine]\nwarmup_ticks = 0\nslow_period_minutes = 60\n')
    rc = main(["live", "--config", str(cfg)])
    assert rc == 0
    assert (tmp_path / "live-out" / "epoch.json").exists()
    assert "ticks processed: 1" in capsys.readouterr().out


def test_live_scanner_failure_exits_one(tmp_path, capsys):
    watch = tmp_path / "watch.csv"
    watch.write_text("address,county,isp\n10.8.0.1,adams,isp0\n")
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'watchlist = "watch.csv"\n'
        'output_dir = "live-out"\n'
        '[live]\nscanner_command = "/nonexistent-scanner-binary"\n'
        'max_ticks = 1\n'
        '[engine]\nwarmup_ticks = 0\n')
    rc = main(["live", "--config", str(cfg)])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
