"""Exception hierarchy shared by every module."""


class BCTError(Exception):
    """Base class for all blindtrace errors."""


class ParameterError(BCTError, ValueError):
    """Invalid argument, length mismatch, or out-of-bounds parameter."""


class FieldMismatchError(ParameterError):
    """Operands belong to fields with different moduli."""


class RandomnessError(BCTError):
    """The random source failed or was exhausted."""


class EncodingError(BCTError):
    """A value cannot be represented in the target encoding."""


class ProtocolError(BCTError):
    """Malformed frame: bad magic, version, type, or structure."""


class ValidationError(ProtocolError):
    """Structurally valid frame carrying a non-canonical value."""


class NeedMoreData(BCTError):
    """Raised by the frame decoder when the buffer holds an incomplete frame."""


class SessionError(BCTError):
    """A networked session failed or was aborted; no result is produced."""


class ParseError(BCTError):
    """Input trail or config file cannot be parsed."""
