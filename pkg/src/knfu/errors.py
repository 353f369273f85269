"""Exception types shared across the package."""


class KnfuError(Exception):
    """Base class for all package errors."""


class InputError(KnfuError):
    """Caller passed data violating an operation's preconditions."""


class NumericError(KnfuError):
    """A computation produced non-finite values."""


class ParseError(KnfuError):
    """A binary or text payload does not match its expected format."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class PartitionError(KnfuError):
    """Data partitioning could not satisfy the requested shard layout."""


class ConfigError(KnfuError):
    """Experiment configuration failed validation."""
