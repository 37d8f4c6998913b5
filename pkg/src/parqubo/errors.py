"""Exception hierarchy shared by every parqubo module."""


class ParquboError(Exception):
    """Base class for all parqubo errors."""


class InvalidInputError(ParquboError, ValueError):
    """An argument violates an operation's preconditions."""


class CapacityError(ParquboError):
    """A problem exceeds the capacity of the requested backend."""


class TransportError(ParquboError):
    """The remote sampler could not be reached."""


class ProtocolError(ParquboError):
    """The remote sampler answered with a malformed payload."""


class ConfigError(ParquboError):
    """An experiment configuration is invalid."""
