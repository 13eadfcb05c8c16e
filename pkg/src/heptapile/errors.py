"""Shared exception types."""


class CapacityError(ValueError):
    """Requested object exceeds the 64-bit indexing contract."""


class FormatError(ValueError):
    """A serialized stream is malformed, inconsistent, or fails its checksum."""


class InvariantError(RuntimeError):
    """A structural invariant that should hold by construction was violated."""
