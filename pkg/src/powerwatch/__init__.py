"""County-level power outage detection from active probing of residential IPs.

The package scores each watched IP with an EWMA of its probe responses,
samples score-weighted "reliable watchlists" per county on an adaptive
schedule, flags counties whose observed response rate falls a threshold
below expectation, and tells power outages from mere internet failures by
checking whether the drop spans every sufficiently sampled ISP.  A
deterministic simulator, an external-scanner adapter, and a buffered
confusion-matrix evaluator round out the toolchain.
"""

from .detector import DetectorConfig, ScanAssessment, assess_scan, classify_failure
from .errors import PowerwatchError
from .evaluation import ConfusionCounts, Metrics, confusion, metrics
from .model import (FailureClass, Injection, InjectionKind, IpEntry,
                    OutageEvent, ProbeOutcome, Scenario, ScanKind, ScanResult)
from .scoring import ScoreStore, reliable_watch_size
from .version import __version__

__all__ = [
    "DetectorConfig",
    "ScanAssessment",
    "assess_scan",
    "classify_failure",
    "PowerwatchError",
    "ConfusionCounts",
    "Metrics",
    "confusion",
    "metrics",
    "FailureClass",
    "Injection",
    "InjectionKind",
    "IpEntry",
    "OutageEvent",
    "ProbeOutcome",
    "Scenario",
    "ScanKind",
    "ScanResult",
    "ScoreStore",
    "reliable_watch_size",
    "__version__",
]
