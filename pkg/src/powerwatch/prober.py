"""Probe backends: a deterministic simulator and an external-scanner shim.

Both expose ``probe(request) -> list[ProbeOutcome]`` and nothing else the
engine depends on, so runs differ only in where the truth comes from.
"""

from __future__ import annotations

import ipaddress
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import BackendError
from .model import (Injection, InjectionKind, PowerStatus, ProbeOutcome,
                    Scenario)
from .rng import DOMAIN_INJECTION, DOMAIN_PROBE, unit_hash


@dataclass(frozen=True)
class ProbeRequest:
    """A batch of addresses to probe at one tick."""

    addresses: tuple[str, ...]
    tick: int

    def __post_init__(self) -> None:
        if not self.addresses:
            raise ValueError("probe request needs at least one address")
        if len(set(self.addresses)) != len(self.addresses):
            raise ValueError("probe request contains duplicate addresses")


class SimWorld:
    """Scripted world: households respond by hash unless a failure says no.

    A healthy address responds at tick t iff
    ``unit_hash(seed, address, t) < base_p``, a pure function of the
    scenario seed, so any probe is reproducible in isolation.  Active
    power injections silence affected addresses of every ISP; internet
    injections silence affected addresses of one ISP.  Partial injections
    (fraction < 1) pick their affected households by a second hash, fixed
    for the injection's whole window.
    """

    def __init__(self, scenario: Scenario) -> None:
        from .scenario import validate_scenario  # cycle: scenario imports model only
        validate_scenario(scenario)
        self.scenario = scenario
        self.seed = scenario.seed
        self.duration_ticks = scenario.duration_ticks
        self._county_of: dict[str, str] = {}
        self._isp_of: dict[str, str] = {}
        self._base_p: dict[str, float] = {}
        self._addr_int: dict[str, int] = {}
        for ip in scenario.ips:
            self._county_of[ip.address] = ip.county
            self._isp_of[ip.address] = ip.isp
            self._base_p[ip.address] = ip.base_p
            self._addr_int[ip.address] = int(ipaddress.ip_address(ip.address))
        self._county_members: dict[str, list[str]] = {}
        for ip in scenario.ips:
            self._county_members.setdefault(ip.county, []).append(ip.address)
        self._injections: list[Injection] = list(scenario.injections)
        self._by_county: dict[str, list[tuple[int, Injection]]] = {}
        for idx, inj in enumerate(self._injections):
            self._by_county.setdefault(inj.county, []).append((idx, inj))

    @property
    def counties(self) -> list[str]:
        return sorted(self._county_members)

    def _affected(self, inj_index: int, inj: Injection, address: str) -> bool:
        if inj.fraction >= 1.0:
            return True
        draw = unit_hash(DOMAIN_INJECTION, self.seed,
                         self._addr_int[address], inj_index)
        return draw < inj.fraction

    def responds(self, address: str, tick: int) -> bool:
        """Whether one address answers a probe at one tick."""
        try:
            county = self._county_of[address]
        except KeyError:
            raise BackendError(f"address {address} is not part of the scenario")
        isp = self._isp_of[address]
        for idx, inj in self._by_county.get(county, ()):
            if not inj.active_at(tick):
                continue
            if inj.kind is InjectionKind.POWER:
                if self._affected(idx, inj, address):
                    return False
            elif inj.isp == isp and self._affected(idx, inj, address):
                return False
        draw = unit_hash(DOMAIN_PROBE, self.seed, self._addr_int[address], tick)
        return draw < self._base_p[address]

    def probe(self, request: ProbeRequest) -> list[ProbeOutcome]:
        return [ProbeOutcome(a, request.tick, self.responds(a, request.tick))
                for a in request.addresses]

    def ground_truth(self, county: str, tick: int) -> PowerStatus:
        """Power status of a county at a tick (internet failures are ON)."""
        if county not in self._county_members:
            raise BackendError(f"county {county!r} is not part of the scenario")
        worst = PowerStatus.ON
        for _, inj in self._by_county.get(county, ()):
            if inj.kind is not InjectionKind.POWER or not inj.active_at(tick):
                continue
            if inj.fraction >= 1.0:
                return PowerStatus.OUT
            worst = PowerStatus.PARTIAL
        return worst

    def out_fraction(self, county: str, tick: int) -> float:
        """Exact fraction of a county's households without power."""
        members = self._county_members.get(county)
        if not members:
            raise BackendError(f"county {county!r} is not part of the scenario")
        active = [(idx, inj) for idx, inj in self._by_county.get(county, ())
                  if inj.kind is InjectionKind.POWER and inj.active_at(tick)]
        if not active:
            return 0.0
        if any(inj.fraction >= 1.0 for _, inj in active):
            return 1.0
        hit = sum(1 for a in members
                  if any(self._affected(idx, inj, a) for idx, inj in active))
        return hit / len(members)

    def power_boundaries(self, county: str) -> list[int]:
        """Ticks at which the county's power truth can change."""
        ticks = {0, self.duration_ticks}
        for _, inj in self._by_county.get(county, ()):
            if inj.kind is InjectionKind.POWER:
                ticks.add(max(0, inj.start_tick))
                ticks.add(min(self.duration_ticks, inj.end_tick))
        return sorted(ticks)


class ExternalScannerBackend:
    """Runs a scanner executable once per probe batch.

    Contract: the scanner is invoked as

        <command...> --targets <file> [--rate <pps>] --timeout <seconds>

    where <file> holds one address per line.  It must exit 0 and print
    one ``<address> <0|1>`` line per probed address.  Addresses missing
    from the output count as non-responsive; any malformed line, unknown
    address, non-zero exit, or overrun of the wall timeout raises
    BackendError.
    """

    def __init__(self, command: Sequence[str], *,
                 rate_cap: int | None = None,
                 probe_timeout_s: float = 5.0,
                 wall_timeout_s: float = 900.0,
                 workdir: str | Path | None = None) -> None:
        if not command:
            raise BackendError("scanner command is empty")
        self.command = list(command)
        self.rate_cap = rate_cap
        self.probe_timeout_s = probe_timeout_s
        self.wall_timeout_s = wall_timeout_s
        self.workdir = Path(workdir) if workdir else None
        self._lock = threading.Lock()  # one scanner process at a time

    def _argv(self, targets_path: str) -> list[str]:
        argv = self.command + ["--targets", targets_path]
        if self.rate_cap is not None:
            argv += ["--rate", str(self.rate_cap)]
        argv += ["--timeout", str(self.probe_timeout_s)]
        return argv

    def probe(self, request: ProbeRequest) -> list[ProbeOutcome]:
        import tempfile

        with self._lock:
            with tempfile.NamedTemporaryFile(
                    "w", suffix=".targets", dir=self.workdir,
                    delete=False) as fh:
                fh.write("\n".join(request.addresses) + "\n")
                targets_path = fh.name
            try:
                try:
                    proc = subprocess.run(
                        self._argv(targets_path),
                        capture_output=True, text=True,
                        timeout=self.wall_timeout_s)
                except OSError as exc:
                    raise BackendError(f"scanner failed to start: {exc}") from exc
                except subprocess.TimeoutExpired as exc:
                    raise BackendError(
                        f"scanner exceeded {self.wall_timeout_s}s wall timeout") from exc
            finally:
                Path(targets_path).unlink(missing_ok=True)

        if proc.returncode != 0:
            raise BackendError(
                f"scanner exited {proc.returncode}: {proc.stderr.strip()[:200]}")
        wanted = set(request.addresses)
        seen: dict[str, bool] = {}
        for lineno, raw in enumerate(proc.stdout.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or parts[1] not in ("0", "1"):
                raise BackendError(f"scanner output line {lineno} malformed: {raw!r}")
            address, flag = parts
            if address not in wanted:
                raise BackendError(f"scanner reported unrequested address {address}")
            seen[address] = flag == "1"
        return [ProbeOutcome(a, request.tick, seen.get(a, False))
                for a in request.addresses]
