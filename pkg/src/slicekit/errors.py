"""Exception types shared across the package.

The CLI maps these onto process exit codes (see slicekit.cli):
configuration errors exit 2, data errors 3, numeric failures 4.
"""


class SliceKitError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SliceKitError, ValueError):
    """An array has the wrong rank or an incompatible extent."""


class ConfigError(SliceKitError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DataError(SliceKitError, ValueError):
    """Input data is malformed (bad labels, unreadable files, ...)."""


class UsageError(SliceKitError, RuntimeError):
    """An API was called out of contract (stale cache, wrong recording, ...)."""


class TrainingError(SliceKitError, RuntimeError):
    """Training produced a non-finite loss or gradient.

    Carries the slice rate that was active when the failure occurred so the
    offending subnet can be identified from the message alone.
    """

    def __init__(self, message: str, rate: float | None = None):
        if rate is not None:
            message = f"{message} (slice rate {rate})"
        super().__init__(message)
        self.rate = rate


class BudgetError(SliceKitError, ValueError):
    """A compute budget lies below the cost of the base subnet."""
