"""Exception types shared across the package.

The split matters for the command line driver: configuration problems and
resource-cap refusals map to distinct exit codes, so they must stay
distinguishable from ordinary ValueErrors raised by numerics.
"""


class GGRError(Exception):
    """Base class for package errors."""


class ConfigError(GGRError):
    """Malformed or inconsistent run configuration."""


class CapExceeded(GGRError):
    """A hard enumeration or evaluation cap was hit.

    Caps are refusals, not silent truncation: callers that want more must
    raise the cap explicitly.
    """
