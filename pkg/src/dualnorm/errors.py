"""Exception hierarchy shared by every module, mapped to CLI exit codes."""


class DualNormError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigurationError(DualNormError):
    """Invalid configuration: bad shapes, illegal layer placement, bad flags."""

    exit_code = 2


class ProtocolError(ConfigurationError):
    """A usage contract was violated (e.g. batch norm trained on a single
    sample, or an evaluation protocol that cannot be satisfied)."""


class DataError(DualNormError):
    """Malformed or inconsistent dataset / manifest content."""

    exit_code = 3


class NumericError(DualNormError):
    """Non-finite values appeared where finite math was required."""

    exit_code = 4


class CheckpointError(DualNormError):
    """Checkpoint serialization failure: corruption, truncation, I/O."""

    exit_code = 5
