"""Watchlist ingest, blacklist filtering, and sampling behaviour."""

import collections
import random

import pytest

from powerwatch.errors import EmptyWatchlist
from powerwatch.model import IpEntry
from powerwatch.scoring import ScoreStore
from powerwatch.watchlist import (Blacklist, apply_blacklist, build_rosters,
                                  load_blacklist, load_watchlist,
                                  sample_reliable_watchlist, save_watchlist)


def make_store(weights):
    store = ScoreStore()
    for a, w in weights.items():
        store.add(a, w)
    return store


def test_watchlist_csv_round_trip(tmp_path):
    entries = [
        IpEntry("198.51.100.1", "adams", "acme", 0.25),
        IpEntry("198.51.100.2", "baker", "zephyr", 1.0),
    ]
    path = tmp_path / "watch.csv"
    save_watchlist(entries, path)
    report = load_watchlist(str(path))
    assert report.entries == entries
    assert not report.rejected


def test_load_watchlist_skips_bad_rows(tmp_path, caplog):
    path = tmp_path / "watch.csv"
    path.write_text(
        "address,county,isp,initial_score\n"
        "198.51.100.1,adams,acme,\n"
        "bogus,adams,acme,\n")
    with caplog.at_level("WARNING"):
        report = load_watchlist(str(path))
    assert len(report.entries) == 1
    assert len(report.rejected) == 1
    assert "rejected" in caplog.text


def test_load_watchlist_empty_raises(tmp_path):
    path = tmp_path / "watch.csv"
    path.write_text("address,county,isp\nnot-an-ip,adams,acme\n")
    with pytest.raises(EmptyWatchlist):
        load_watchlist(str(path))
    path.write_text("wrong,header\n")
    with pytest.raises(EmptyWatchlist):
        load_watchlist(str(path))


def test_build_rosters_sorted_and_grouped():
    entries = [
        IpEntry("10.0.0.9", "baker", "acme"),
        IpEntry("10.0.0.1", "adams", "acme"),
        IpEntry("10.0.0.5", "adams", "zephyr"),
    ]
    rosters = build_rosters(entries)
    assert list(rosters) == ["adams", "baker"]
    assert rosters["adams"].addresses == ["10.0.0.1", "10.0.0.5"]
    assert rosters["adams"].isp_of() == {"10.0.0.1": "acme", "10.0.0.5": "zephyr"}


def test_blacklist_exact_and_cidr(tmp_path):
    path = tmp_path / "deny.txt"
    path.write_text(
        "# infra\n"
        "198.51.100.7\n"
        "203.0.113.0/28   # honeypot block\n"
        "\n"
        "not-an-entry\n")
    deny = load_blacklist(str(path))
    assert "198.51.100.7" in deny
    assert "203.0.113.5" in deny
    assert "203.0.113.200" not in deny
    assert "198.51.100.8" not in deny


def test_apply_blacklist_splits():
    entries = [IpEntry("10.0.0.1", "adams", "acme"),
               IpEntry("10.0.0.2", "adams", "acme")]
    kept, removed = apply_blacklist(entries, Blacklist(exact=["10.0.0.2"]))
    assert [e.address for e in kept] == ["10.0.0.1"]
    assert [e.address for e in removed] == ["10.0.0.2"]


# --- sampling -----------------------------------------------------------------

def test_sample_basic_invariants():
    addrs = [f"10.1.0.{i}" for i in range(30)]
    store = make_store({a: 0.5 for a in addrs})
    rng = random.Random(3)
    for trial in range(200):
        n = rng.randrange(0, 35)
        got = sample_reliable_watchlist(addrs, store, n, rng)
        assert len(got) == min(n, len(addrs)) if n > 0 else got == []
        assert len(set(got)) == len(got)
        assert set(got) <= set(addrs)


def test_sample_whole_pool_when_n_covers_it():
    addrs = [f"10.1.0.{i}" for i in range(5)]
    store = make_store({a: 0.5 for a in addrs})
    got = sample_reliable_watchlist(addrs, store, 5, random.Random(0))
    assert got == addrs
    got = sample_reliable_watchlist(addrs, store, 50, random.Random(0))
    assert got == addrs


def test_sample_empty_roster_raises():
    with pytest.raises(EmptyWatchlist):
        sample_reliable_watchlist([], make_store({}), 3, random.Random(0))


def test_sample_excludes_zero_scores_when_enough_positive():
    addrs = [f"10.1.0.{i}" for i in range(10)]
    weights = {a: (0.0 if i < 4 else 0.8) for i, a in enumerate(addrs)}
    store = make_store(weights)
    rng = random.Random(5)
    dead = {a for a, w in weights.items() if w == 0.0}
    for _ in range(300):
        got = sample_reliable_watchlist(addrs, store, 4, rng)
        assert not (set(got) & dead)


def test_sample_includes_zero_scores_when_pool_too_small():
    addrs = [f"10.1.0.{i}" for i in range(6)]
    weights = {a: (0.9 if i < 2 else 0.0) for i, a in enumerate(addrs)}
    store = make_store(weights)
    rng = random.Random(9)
    seen = set()
    for _ in range(500):
        got = sample_reliable_watchlist(addrs, store, 4, rng)
        assert len(got) == 4
        seen.update(got)
    assert seen == set(addrs)  # zero-score members participate at the floor


def test_sample_deterministic_for_same_stream():
    addrs = [f"10.1.0.{i}" for i in range(20)]
    store = make_store({a: 0.1 + 0.04 * i for i, a in enumerate(addrs)})
    a = sample_reliable_watchlist(addrs, store, 7, random.Random(42))
    b = sample_reliable_watchlist(addrs, store, 7, random.Random(42))
    assert a == b


def test_sample_prefers_heavier_addresses():
    addrs = ["10.2.0.1", "10.2.0.2"]
    store = make_store({"10.2.0.1": 0.9, "10.2.0.2": 0.05})
    rng = random.Random(17)
    counts = collections.Counter()
    for _ in range(2000):
        counts.update(sample_reliable_watchlist(addrs, store, 1, rng))
    # exact P(heavy) = 0.9/0.95 ~ 0.947
    assert counts["10.2.0.1"] / 2000 == pytest.approx(0.9 / 0.95, abs=0.03)
