"""Exception types shared across the package."""


class SliceGuardError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SliceGuardError):
    """Invalid slice/UE/scenario configuration."""


class PolicyMismatchError(SliceGuardError):
    """An operation was applied to a slice policy it does not support."""


class ModelFormatError(SliceGuardError):
    """Portable model file violates the documented format."""


class InputError(SliceGuardError):
    """Runtime input (e.g. feature vector) does not match the loaded model."""


class ProtocolError(SliceGuardError):
    """Framing or message-level violation on a control connection."""


class DecodeError(ProtocolError):
    """Malformed message body; carries the offending field name."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class EncodeError(ProtocolError):
    """Message cannot be encoded (invariant violation or oversize payload)."""


class HandshakeError(ProtocolError):
    """Hello exchange failed (missing or version-mismatched)."""
