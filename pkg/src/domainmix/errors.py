"""Exception types shared across the package.

Each class carries the CLI exit code it maps to: 2 for configuration
problems, 3 for bad input data, 4 for internal invariant violations.
"""


class DomainMixError(Exception):
    exit_code = 4


class ConfigError(DomainMixError):
    """Invalid configuration or parameters."""

    exit_code = 2


class DataError(DomainMixError):
    """Invalid or inconsistent input data."""

    exit_code = 3


class InternalError(DomainMixError):
    """A supposedly-impossible state was reached."""

    exit_code = 4
