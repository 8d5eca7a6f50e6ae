"""Exception types shared by the codecs and state machines."""


class WireError(ValueError):
    """Base class for codec failures."""


class EncodeError(WireError):
    """A value cannot be represented on the wire."""


class DecodeError(WireError):
    """A byte sequence is not a valid message."""


class TruncatedError(DecodeError):
    """Fewer bytes are available than the header announces."""
