"""Exception types shared across the engine.

Every expected failure raises an :class:`EngineError` subclass carrying a
stable ``code`` slug; the CLI prints errors as ``error: <code>: <message>``.
"""


class EngineError(Exception):
    """Base class for all anticipated failures."""

    code = "engine"


class FormatError(EngineError):
    """A file does not conform to its documented layout."""

    code = "format"


class ValidationError(EngineError):
    """An input violates a contract (invariant, precondition, dimension)."""

    code = "invalid"
