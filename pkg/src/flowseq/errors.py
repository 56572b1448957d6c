"""Exception types shared across the package."""


class FlowseqError(Exception):
    """Base class for all library errors."""


class InvalidInputError(FlowseqError):
    """An argument violates an operation's preconditions."""


class DegenerateDataError(FlowseqError):
    """Input data carries no usable variation (zero scatter, singular fits)."""


class CorruptDictionaryError(FlowseqError):
    """A persisted gesture dictionary fails to parse or violates invariants."""
