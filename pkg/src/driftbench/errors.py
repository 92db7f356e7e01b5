"""Exception hierarchy shared across the package."""


class DriftBenchError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DriftBenchError, ValueError):
    """A caller supplied an invalid parameter or configuration value."""


class DataError(DriftBenchError):
    """Input data (CSV files, windows) is malformed or unusable."""


class InvalidSplitError(DriftBenchError, ValueError):
    """A split point leaves one side of the window empty."""
