"""Watchlist ingest, blacklist filtering, and reliable-watchlist sampling.

File formats:

* watchlist CSV with header ``address,county,isp[,initial_score]``;
* blacklist text file, one entry per line, exact IPs or CIDR blocks,
  ``#`` comments and blank lines ignored.
"""

from __future__ import annotations

import csv
import ipaddress
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyWatchlist
from .model import IpEntry, ValidationReport, validate_watchlist
from .scoring import ScoreStore

logger = logging.getLogger(__name__)

# Weight floor for zero-score members when the positive pool is too small
# to fill the sample on its own.
ZERO_WEIGHT = 1e-6


@dataclass
class RegionRoster:
    """All known IPs of one county, in stable (sorted-address) order."""

    county: str
    entries: list[IpEntry] = field(default_factory=list)

    @property
    def addresses(self) -> list[str]:
        return [e.address for e in self.entries]

    def isp_of(self) -> dict[str, str]:
        return {e.address: e.isp for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)


def build_rosters(entries: Iterable[IpEntry]) -> dict[str, RegionRoster]:
    """Group entries by county; each roster is sorted by address string."""
    rosters: dict[str, RegionRoster] = {}
    for entry in entries:
        rosters.setdefault(entry.county, RegionRoster(entry.county)).entries.append(entry)
    for roster in rosters.values():
        roster.entries.sort(key=lambda e: e.address)
    return dict(sorted(rosters.items()))


class Blacklist:
    """Addresses that must never be probed (opt-outs, honeypots, infra)."""

    def __init__(self, exact: Iterable[str] = (),
                 networks: Iterable[str] = ()) -> None:
        self._exact = {str(ipaddress.ip_address(a)) for a in exact}
        self._networks = [ipaddress.ip_network(n, strict=False) for n in networks]

    def __contains__(self, address: str) -> bool:
        if address in self._exact:
            return True
        if not self._networks:
            return False
        ip = ipaddress.ip_address(address)
        return any(ip in net for net in self._networks)

    def __len__(self) -> int:
        return len(self._exact) + len(self._networks)


def load_blacklist(path: str) -> Blacklist:
    """Parse a blacklist file; malformed lines are skipped with a warning."""
    exact: list[str] = []
    networks: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "/" in line:
                try:
                    ipaddress.ip_network(line, strict=False)
                except ValueError:
                    logger.warning("%s:%d: bad CIDR %r, skipped", path, lineno, line)
                    continue
                networks.append(line)
            else:
                try:
                    ipaddress.ip_address(line)
                except ValueError:
                    logger.warning("%s:%d: bad address %r, skipped", path, lineno, line)
                    continue
                exact.append(line)
    return Blacklist(exact, networks)


def apply_blacklist(entries: Iterable[IpEntry],
                    blacklist: Blacklist) -> tuple[list[IpEntry], list[IpEntry]]:
    """Split entries into (kept, removed) against the blacklist."""
    kept: list[IpEntry] = []
    removed: list[IpEntry] = []
    for entry in entries:
        (removed if entry.address in blacklist else kept).append(entry)
    return kept, removed


def load_watchlist(path: str) -> ValidationReport:
    """Read and validate a watchlist CSV.

    Raises EmptyWatchlist when no row survives validation; rejected rows
    are logged at warning level and reported for the caller to surface.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "address" not in reader.fieldnames:
            raise EmptyWatchlist(f"{path}: missing header with 'address' column")
        rows = list(reader)
    report = validate_watchlist(rows)
    for idx, reason in report.rejected:
        logger.warning("%s: row %d rejected: %s", path, idx + 2, reason)
    if not report.entries:
        raise EmptyWatchlist(f"{path}: no valid watchlist rows")
    return report


def save_watchlist(entries: Iterable[IpEntry], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["address", "county", "isp", "initial_score"])
        for e in entries:
            writer.writerow([e.address, e.county, e.isp, repr(e.initial_score)])


def sample_reliable_watchlist(addresses: Sequence[str], store: ScoreStore,
                              n: int, rng: random.Random) -> list[str]:
    """Draw n distinct addresses, weighted by current score.

    Equivalent to drawing without replacement one at a time with
    probability proportional to score: each address gets the key
    log(u) / w for u ~ U(0,1), and the n largest keys win.  Zero-score
    members are excluded while enough positive-score members exist to
    fill the sample; otherwise every member participates with its weight
    floored at ZERO_WEIGHT.
    """
    if n <= 0:
        return []
    if not addresses:
        raise EmptyWatchlist("cannot sample from an empty region roster")
    if n >= len(addresses):
        return list(addresses)

    weights = [(a, store.score(a)) for a in addresses]
    positive = [(a, w) for a, w in weights if w > 0.0]
    if len(positive) >= n:
        pool = positive
    else:
        pool = [(a, max(w, ZERO_WEIGHT)) for a, w in weights]
    if n >= len(pool):
        return [a for a, _ in pool]

    keyed = []
    for a, w in pool:
        u = rng.random()
        while u == 0.0:  # log(0) guard; probability ~0 but cheap to close
            u = rng.random()
        keyed.append((math.log(u) / w, a))
    keyed.sort(reverse=True)
    return [a for _, a in keyed[:n]]
