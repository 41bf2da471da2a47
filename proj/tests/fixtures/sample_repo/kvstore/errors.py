"""Exception hierarchy."""


class KVError(Exception):
    """Base class for kvstore errors."""


class KeyNotFound(KVError, KeyError):
    """Raised when a key is missing from the store."""


class ProtocolError(KVError):
    """Raised for malformed network messages."""
