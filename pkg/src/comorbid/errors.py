"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: validation-type failures exit 1,
I/O failures (OSError and friends) exit 2.
"""
from __future__ import annotations


class ComorbidError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ComorbidError):
    """Input violates a documented invariant (duplicates, bad patterns, ...)."""


class ParseError(ComorbidError):
    """Malformed file content. Carries a line number when one is known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ArgumentError(ComorbidError):
    """A caller passed an argument outside an operation's domain."""


class OutOfScopeError(ValidationError):
    """ICD code falls outside the supported A00-N99 range."""


class NetworkError(ComorbidError):
    """Transport-level failure while talking to a remote endpoint."""


class DegenerateDataError(ComorbidError):
    """Training data containing a single class cannot fit a classifier."""


class DegenerateMarginalsError(ComorbidError):
    """Chance agreement is 1; Cohen's kappa is undefined for this table."""


class EmptyScopeError(ComorbidError):
    """An annotator pair shares no mentions in the requested scope."""


class UnknownMentionError(ComorbidError):
    """An annotation references a mention that was never extracted."""


class VersionError(ComorbidError):
    """A serialized artifact carries an unsupported format version."""

    def __init__(self, expected: int, found: object):
        self.expected = expected
        self.found = found
        super().__init__(f"unsupported format version: expected {expected}, found {found!r}")


class VersionConflictError(ComorbidError):
    """Optimistic-lock check failed: a newer annotation revision exists."""

    def __init__(self, expected: int, submitted: int):
        self.expected = expected
        self.submitted = submitted
        super().__init__(
            f"stale annotation version: store is at {expected}, submission carried {submitted}"
        )
