"""Domain model tests: validation and the small bits of type behaviour."""

import pytest

from powerwatch.model import (FailureClass, Injection, InjectionKind, IpEntry,
                              OutageEvent, validate_watchlist)


def row(address="198.51.100.7", county="adams", isp="acme", score=""):
    return {"address": address, "county": county, "isp": isp,
            "initial_score": score}


def test_validate_watchlist_accepts_good_rows():
    report = validate_watchlist([row(), row(address="198.51.100.8", score="0.75")])
    assert not report.rejected
    assert [e.address for e in report.entries] == ["198.51.100.7", "198.51.100.8"]
    assert report.entries[0].initial_score == 0.5
    assert report.entries[1].initial_score == 0.75


def test_validate_watchlist_rejections():
    rows = [
        row(address="not-an-ip"),
        row(county="  "),
        row(isp=""),
        row(score="abc"),
        row(score="1.5"),
        row(),
        row(),  # duplicate of the previous
    ]
    report = validate_watchlist(rows)
    assert len(report.entries) == 1
    reasons = dict(report.rejected)
    assert "malformed address" in reasons[0]
    assert "missing county" in reasons[1]
    assert "missing isp" in reasons[2]
    assert "bad initial_score" in reasons[3]
    assert "out of range" in reasons[4]
    assert "duplicate" in reasons[6]


def test_validate_watchlist_accepts_ipv6():
    report = validate_watchlist([row(address="2001:db8::1")])
    assert not report.rejected


def test_ip_entry_score_range():
    with pytest.raises(ValueError):
        IpEntry("198.51.100.7", "adams", "acme", 1.01)


def test_injection_window_half_open():
    inj = Injection(InjectionKind.POWER, "adams", start_tick=100, end_tick=200)
    assert not inj.active_at(99)
    assert inj.active_at(100)
    assert inj.active_at(199)
    assert not inj.active_at(200)


def test_outage_event_overlaps():
    event = OutageEvent("adams", FailureClass.POWER, 50, 100, 0.3, 0.4)
    assert event.overlaps(99, 150)
    assert not event.overlaps(100, 150)  # half-open on both sides
    ongoing = OutageEvent("adams", FailureClass.POWER, 50, None, 0.3, 0.4)
    assert ongoing.overlaps(900, 1000)
