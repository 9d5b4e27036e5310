"""Exception types shared across the package."""

from __future__ import annotations


class TodbenchError(Exception):
    """Base class for all package errors."""


class MalformedDocument(TodbenchError):
    """A schema/goal/corpus document is not syntactically valid."""


class SchemaViolation(TodbenchError):
    """A schema document violates an invariant; carries the offending path."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class AmbiguousIntent(TodbenchError):
    """Two registered domains define the same normalized intent name."""


class ParseError(TodbenchError):
    """Call-bearing text could not be completed into a well-formed call."""


class ContractViolation(TodbenchError):
    """An operation was invoked outside its stated precondition."""


class EmptyDialog(TodbenchError):
    """A prompt was requested for a dialog with no turns."""


class EmptySystemText(TodbenchError):
    """Diversity metrics need at least one system turn."""


class ExemplarGenerationFailed(TodbenchError):
    """Stage-1 example generation exhausted its retry budget."""

    def __init__(self, message: str, last_completion: str = ""):
        super().__init__(message)
        self.last_completion = last_completion


class BackendError(TodbenchError):
    """Text-generation backend failure. ``kind`` is one of
    Unreachable, Unauthorized, RateLimited, Truncated."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class StuckDialog(TodbenchError):
    """The simulator made no progress for too many consecutive turns."""


class UnsupportedRecord(TodbenchError):
    """A raw dataset record could not be mapped; carries file and offset."""

    def __init__(self, message: str, source: str = ""):
        super().__init__(f"{source}: {message}" if source else message)
        self.source = source


class ConfigError(TodbenchError):
    """Run configuration is malformed or out of range."""
