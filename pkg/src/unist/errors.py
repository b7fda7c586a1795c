"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes (see ``unist.cli``): configuration
problems, data problems, and numeric failures are kept distinct so scripted
callers can react to each.
"""


class UnistError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(UnistError):
    """Tensor dimensions do not satisfy an operation's contract."""


class ConfigError(UnistError):
    """A configuration value is invalid or inconsistent."""


class UsageError(UnistError):
    """An API was called in an unsupported way (e.g. backward on a non-scalar)."""


class NumericError(UnistError):
    """A numeric check failed (non-finite values, gradient check failure)."""


class DegenerateInputError(UnistError):
    """A loss received an input on which it is undefined (all-zero, constant)."""


class MetricUndefinedError(UnistError):
    """A metric is undefined for the given prediction/ground-truth pair."""


class DataError(UnistError):
    """A dataset could not be loaded; the message names the offending path."""


class FormatError(DataError):
    """A file does not parse as the expected on-disk format."""


class CheckpointError(UnistError):
    """A checkpoint is incompatible with the current model (names/shapes)."""
