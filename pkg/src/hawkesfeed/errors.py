"""Exception classes shared across the package.

The CLI maps each class to its own exit code, so keep the taxonomy small:
data that cannot be parsed, configuration that cannot be obeyed, and
estimation that cannot proceed.
"""


class HawkesFeedError(Exception):
    pass


class DataFormatError(HawkesFeedError):
    """Malformed input file. `line` is 1-based when the format is line-oriented."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(HawkesFeedError):
    """Inconsistent run configuration, e.g. weight/feature dimension mismatch."""


class EstimationError(HawkesFeedError):
    """Fitting cannot start or cannot continue on the given data."""
