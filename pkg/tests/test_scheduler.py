"""Scheduler tests: counters, adaptation bounds, slow scans, capping."""

import pytest

from powerwatch.errors import UnknownRegion
from powerwatch.model import ScanKind
from powerwatch.scheduler import ScanCommand, Scheduler


def fast_ticks(sched, county, start, end):
    ticks = []
    for tick in range(start, end):
        for cmd in sched.on_tick(tick):
            if cmd == ScanCommand(county, ScanKind.FAST_RELIABLE):
                ticks.append(tick)
    return ticks


def test_untracked_counties_get_slow_scans_only():
    sched = Scheduler(["adams", "baker"], slow_period=360)
    all_cmds = []
    for tick in range(0, 721):
        all_cmds += sched.on_tick(tick)
    slow = [c for c in all_cmds if c.kind is ScanKind.SLOW_FULL]
    fast = [c for c in all_cmds if c.kind is ScanKind.FAST_RELIABLE]
    assert not fast
    # slow at ticks 0, 360, 720 for both counties
    assert len(slow) == 6


def test_first_fast_scan_five_quanta_after_tracking():
    sched = Scheduler(["adams"], slow_period=100000)
    sched.on_tick(0)
    sched.set_tracked("adams", True)
    # counter 5, decremented on even ticks 2,4,6,8,10
    assert fast_ticks(sched, "adams", 1, 11) == [10]


def test_period_adapts_down_on_failures_and_up_on_health():
    sched = Scheduler(["adams"], slow_period=100000)
    sched.set_tracked("adams", True)
    assert sched.period_minutes("adams") == 10
    for expected in (8, 6, 4, 2):
        sched.on_assessment("adams", failure=True)
        assert sched.period_minutes("adams") == expected
    sched.on_assessment("adams", failure=True)
    assert sched.period_minutes("adams") == 2  # clamped at the floor
    for expected in (4, 6, 8, 10):
        sched.on_assessment("adams", failure=False)
        assert sched.period_minutes("adams") == expected
    sched.on_assessment("adams", failure=False)
    assert sched.period_minutes("adams") == 10  # clamped at the ceiling


def test_period_change_takes_effect_at_next_reload():
    sched = Scheduler(["adams"], slow_period=100000)
    sched.set_tracked("adams", True)
    got = fast_ticks(sched, "adams", 1, 11)
    assert got == [10]
    # failure after the reload at tick 10: the countdown already restarted
    # at 5 quanta, so the next scan still lands 10 minutes out, and only
    # the one after that comes 8 minutes later.
    sched.on_assessment("adams", failure=True)
    assert fast_ticks(sched, "adams", 11, 40) == [20, 28, 36]


def test_fast_cadence_at_the_floor_is_two_minutes():
    sched = Scheduler(["adams"], slow_period=100000)
    sched.set_tracked("adams", True)
    for _ in range(4):
        sched.on_assessment("adams", failure=True)
    fast_ticks(sched, "adams", 1, 11)  # consume the first countdown
    assert fast_ticks(sched, "adams", 11, 21) == [12, 14, 16, 18, 20]


def test_untrack_stops_fast_scans():
    sched = Scheduler(["adams"], slow_period=100000)
    sched.set_tracked("adams", True)
    sched.set_tracked("adams", False)
    assert fast_ticks(sched, "adams", 1, 50) == []
    with pytest.raises(UnknownRegion):
        sched.period_minutes("adams")


def test_slow_scans_precede_fast_in_same_tick():
    sched = Scheduler(["adams"], slow_period=10)
    sched.set_tracked("adams", True)
    for tick in range(1, 10):
        sched.on_tick(tick)
    cmds = sched.on_tick(10)
    assert cmds[0].kind is ScanKind.SLOW_FULL
    assert cmds[1].kind is ScanKind.FAST_RELIABLE


def test_missed_slow_boundaries_collapse_to_one():
    sched = Scheduler(["adams"], slow_period=360)
    sched.on_tick(0)
    cmds = sched.on_tick(2000)  # 5 boundaries missed
    assert len([c for c in cmds if c.kind is ScanKind.SLOW_FULL]) == 1
    assert sched.next_slow_tick == 2160


def test_command_cap_defers_fifo():
    sched = Scheduler(["a", "b", "c"], slow_period=100000,
                      max_commands_per_tick=2)
    for county in ("a", "b", "c"):
        sched.set_tracked(county, True)
    # all three counters hit zero at tick 10
    emitted = []
    for tick in range(1, 11):
        emitted += [(tick, c) for c in sched.on_tick(tick)]
    assert [c.county for _, c in emitted if _ == 10] == ["a", "b"]
    # the deferred command drains first on the next tick
    nxt = sched.on_tick(11)
    assert nxt[0] == ScanCommand("c", ScanKind.FAST_RELIABLE)


def test_unknown_county_rejected():
    sched = Scheduler(["adams"])
    with pytest.raises(UnknownRegion):
        sched.set_tracked("nowhere", True)
    with pytest.raises(UnknownRegion):
        sched.on_assessment("nowhere", True)
    with pytest.raises(UnknownRegion):
        Scheduler([])
