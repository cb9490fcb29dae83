"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: config errors exit 2, data
errors exit 3 and numerical errors exit 4.
"""


class PanelirfError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(PanelirfError):
    """Invalid or inconsistent pipeline configuration."""

    exit_code = 2


class DataError(PanelirfError):
    """Malformed, incomplete or out-of-contract input data."""

    exit_code = 3


class NumericalError(PanelirfError):
    """A numerical procedure failed (rank deficiency, degenerate variance, ...)."""

    exit_code = 4
