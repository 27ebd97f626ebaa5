"""Shared exception types."""


class ConfigurationError(ValueError):
    """Invalid setup parameters (key sizes, modes, extractor budgets)."""


class ProtocolError(RuntimeError):
    """A peer broke the message contract; the session is void."""


class SessionVoid(ProtocolError):
    """Transport-level failure: timeout, closed peer, or a bad frame."""


class DecodeError(SessionVoid):
    """A frame or message body could not be decoded."""
