"""
Error Hierarchy

All failures raised by the library derive from CollabError so the CLI and
the HTTP surface can map them to exit codes and status codes in one place.
"""


class CollabError(Exception):
    """Base class for every library error."""
    exit_code = 3


class ConfigurationError(CollabError):
    """Raised when a configuration is invalid or infeasible."""
    exit_code = 1


class DataError(CollabError):
    """Raised when input data cannot be used."""
    exit_code = 2


class DataFormatError(DataError):
    """Raised when a log does not match its format descriptor."""


class InputError(DataError):
    """Raised when an operation's preconditions on its inputs do not hold."""


class DayRangeError(InputError):
    """Raised when a day number falls outside the dataset span."""


class UndefinedMetricError(InputError):
    """Raised when a metric or statistic is undefined for its inputs."""


class ProtocolError(CollabError):
    """Base class for private protocol failures."""


class ProtocolAbortError(ProtocolError):
    """Raised when a channel fails or closes mid-protocol."""


class HandshakeError(ProtocolError):
    """Raised when two sessions do not agree on group parameters."""
