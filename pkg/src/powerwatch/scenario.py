"""Scenario files: validation, JSON round-trip, and synthetic generation.

A scenario fixes everything the simulator needs: the seed, the run length,
every simulated household (address, county, ISP, healthy response
probability), and the scripted failures.  Format is a single JSON document
with a ``format`` marker for forward compatibility.
"""

from __future__ import annotations

import ipaddress
import json
from typing import Sequence

from .errors import ScenarioError
from .model import Injection, InjectionKind, IpEntry, Scenario, ScenarioIp
from .rng import tagged_rng

FORMAT_VERSION = 1

_BASE_ADDRESS = int(ipaddress.ip_address("10.0.0.0"))


def validate_scenario(scenario: Scenario) -> None:
    """Raise ScenarioError on any structural problem."""
    if scenario.duration_ticks <= 0:
        raise ScenarioError("duration_ticks must be positive")
    if not scenario.ips:
        raise ScenarioError("scenario has no IPs")
    seen: set[str] = set()
    counties: set[str] = set()
    isps_by_county: dict[str, set[str]] = {}
    for ip in scenario.ips:
        try:
            ipaddress.ip_address(ip.address)
        except ValueError:
            raise ScenarioError(f"malformed address {ip.address!r}") from None
        if ip.address in seen:
            raise ScenarioError(f"duplicate address {ip.address}")
        seen.add(ip.address)
        if not 0.0 <= ip.base_p <= 1.0:
            raise ScenarioError(f"{ip.address}: base_p out of [0,1]: {ip.base_p}")
        counties.add(ip.county)
        isps_by_county.setdefault(ip.county, set()).add(ip.isp)
    for i, inj in enumerate(scenario.injections):
        where = f"injection {i}"
        if inj.county not in counties:
            raise ScenarioError(f"{where}: unknown county {inj.county!r}")
        if inj.start_tick >= inj.end_tick:
            raise ScenarioError(f"{where}: empty window [{inj.start_tick}, {inj.end_tick})")
        if inj.start_tick < 0 or inj.end_tick > scenario.duration_ticks:
            raise ScenarioError(f"{where}: window outside [0, {scenario.duration_ticks})")
        if not 0.0 < inj.fraction <= 1.0:
            raise ScenarioError(f"{where}: fraction out of (0,1]: {inj.fraction}")
        if inj.kind is InjectionKind.INTERNET:
            if not inj.isp:
                raise ScenarioError(f"{where}: internet injection needs an isp")
            if inj.isp not in isps_by_county[inj.county]:
                raise ScenarioError(
                    f"{where}: isp {inj.isp!r} not present in {inj.county}")


def save_scenario(scenario: Scenario, path: str) -> None:
    validate_scenario(scenario)
    doc = {
        "format": FORMAT_VERSION,
        "seed": scenario.seed,
        "duration_ticks": scenario.duration_ticks,
        "ips": [
            {"address": ip.address, "county": ip.county,
             "isp": ip.isp, "base_p": ip.base_p}
            for ip in scenario.ips
        ],
        "injections": [
            {"kind": inj.kind.value, "county": inj.county,
             "start_tick": inj.start_tick, "end_tick": inj.end_tick,
             "isp": inj.isp, "fraction": inj.fraction}
            for inj in scenario.injections
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    if doc.get("format") != FORMAT_VERSION:
        raise ScenarioError(
            f"{path}: unsupported format {doc.get('format')!r}, want {FORMAT_VERSION}")
    try:
        ips = [ScenarioIp(address=str(d["address"]), county=str(d["county"]),
                          isp=str(d["isp"]), base_p=float(d["base_p"]))
               for d in doc["ips"]]
        injections = [Injection(kind=InjectionKind(d["kind"]),
                                county=str(d["county"]),
                                start_tick=int(d["start_tick"]),
                                end_tick=int(d["end_tick"]),
                                isp=d.get("isp"),
                                fraction=float(d.get("fraction", 1.0)))
                      for d in doc["injections"]]
        scenario = Scenario(seed=int(doc["seed"]),
                            duration_ticks=int(doc["duration_ticks"]),
                            ips=ips, injections=injections)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: bad scenario payload: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def watchlist_entries(scenario: Scenario,
                      seed_scores_from_base_p: bool = False) -> list[IpEntry]:
    """Derive a watchlist from a scenario's households.

    With ``seed_scores_from_base_p`` the initial scores start at each
    household's true response probability, modelling an operator who
    carries scores over from earlier monitoring instead of cold-starting
    at the default.
    """
    if seed_scores_from_base_p:
        return [IpEntry(ip.address, ip.county, ip.isp, ip.base_p)
                for ip in scenario.ips]
    return [IpEntry(ip.address, ip.county, ip.isp) for ip in scenario.ips]


def synthetic_ips(n_counties: int, ips_per_county: int, n_isps: int,
                  seed: int, prob_range: tuple[float, float] = (0.55, 0.95),
                  ) -> list[ScenarioIp]:
    """Generate a balanced synthetic population.

    Counties are named cty000.., ISPs isp00.., addresses allocated
    sequentially from 10.0.0.0.  ISPs rotate within each county so every
    county sees every ISP with near-equal membership.
    """
    if n_counties < 1 or ips_per_county < 1 or n_isps < 1:
        raise ScenarioError("population dimensions must be >= 1")
    lo, hi = prob_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise ScenarioError(f"bad prob_range {prob_range}")
    rng = tagged_rng(seed, "synthetic-ips")
    ips: list[ScenarioIp] = []
    counter = 0
    for c in range(n_counties):
        county = f"cty{c:03d}"
        for i in range(ips_per_county):
            address = str(ipaddress.ip_address(_BASE_ADDRESS + counter))
            counter += 1
            ips.append(ScenarioIp(
                address=address,
                county=county,
                isp=f"isp{i % n_isps:02d}",
                base_p=rng.uniform(lo, hi),
            ))
    return ips


def random_scenario(*, seed: int, n_counties: int, ips_per_county: int,
                    n_isps: int, duration_ticks: int, warmup_ticks: int,
                    power_injections: int, internet_injections: int,
                    min_fraction: float = 1.0,
                    min_len: int = 240, max_len: int = 720,
                    prob_range: tuple[float, float] = (0.55, 0.95),
                    ) -> Scenario:
    """Population plus randomly placed injections, one per chosen county.

    Injection windows start after the warm-up and end early enough that
    the run can observe the recovery.  Injected counties are distinct so
    evaluation stays unambiguous.
    """
    total = power_injections + internet_injections
    if total > n_counties:
        raise ScenarioError("more injections than counties")
    lo_start = warmup_ticks + 60
    hi_start = duration_ticks - max_len - 60
    if total and hi_start <= lo_start:
        raise ScenarioError("duration too short for requested injections")
    ips = synthetic_ips(n_counties, ips_per_county, n_isps, seed, prob_range)
    rng = tagged_rng(seed, "injections")
    counties = sorted({ip.county for ip in ips})
    chosen = rng.sample(counties, total)
    isps = sorted({ip.isp for ip in ips})
    injections: list[Injection] = []
    for i, county in enumerate(chosen):
        start = rng.randrange(lo_start, hi_start)
        length = rng.randrange(min_len, max_len + 1)
        if i < power_injections:
            # Half the power failures are total, the rest partial, so a
            # batch exercises both truth-interval shapes.
            if rng.random() < 0.5:
                fraction = 1.0
            else:
                fraction = rng.uniform(min_fraction, min(1.0, min_fraction + 0.3))
            injections.append(Injection(
                kind=InjectionKind.POWER, county=county,
                start_tick=start, end_tick=start + length,
                fraction=fraction))
        else:
            injections.append(Injection(
                kind=InjectionKind.INTERNET, county=county,
                start_tick=start, end_tick=start + length,
                isp=rng.choice(isps), fraction=1.0))
    scenario = Scenario(seed=seed, duration_ticks=duration_ticks,
                        ips=ips, injections=injections)
    validate_scenario(scenario)
    return scenario


def make_scenario(ips: Sequence[ScenarioIp], injections: Sequence[Injection],
                  seed: int, duration_ticks: int) -> Scenario:
    scenario = Scenario(seed=seed, duration_ticks=duration_ticks,
                        ips=list(ips), injections=list(injections))
    validate_scenario(scenario)
    return scenario
