"""Shared exception hierarchy.

Two families matter to callers: bad input (CLI exit code 1) and broken
internal invariants (CLI exit code 2).
"""


class EvacsimError(Exception):
    pass


class InputError(EvacsimError):
    """The user gave us something unusable: bad file, bad flag, bad value."""


class InternalError(EvacsimError):
    """An invariant the simulator guarantees was violated. Always a bug."""
