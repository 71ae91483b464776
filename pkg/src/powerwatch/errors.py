"""Exception types shared across the package.

Everything raised deliberately by this package derives from PowerwatchError,
so callers can catch one base class at the CLI boundary.
"""


class PowerwatchError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PowerwatchError):
    """Run configuration is missing, malformed, or inconsistent."""


class EmptyWatchlist(PowerwatchError):
    """A region ended up with no usable IPs after ingest/blacklisting."""


class SizingError(PowerwatchError):
    """Reliable-watchlist sizing was asked for an untrackable region."""


class EmptyScan(PowerwatchError):
    """A scan produced no probe outcomes to assess."""


class OrderingError(PowerwatchError):
    """Per-IP observations arrived out of tick order."""


class UnknownRegion(PowerwatchError):
    """A county name is not part of the configured universe."""


class BackendError(PowerwatchError):
    """The probing backend failed (process error, bad output, timeout)."""


class RestoreError(PowerwatchError):
    """Persisted run state (snapshot, event log, truth data) is unreadable."""


class ScenarioError(PowerwatchError):
    """A scenario file is malformed or internally inconsistent."""
