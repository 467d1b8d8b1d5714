"""Exception hierarchy.

Every error raised on bad input derives from :class:`JudgecalError`; the CLI
maps :class:`NumericFailure` subclasses to exit code 2 and everything else
to exit code 1.
"""

from __future__ import annotations


class JudgecalError(ValueError):
    """Base class for validation errors."""


class NumericFailure(JudgecalError):
    """Base class for numeric breakdowns (exit code 2)."""


class EmptyCalibrationSet(JudgecalError):
    pass


class NonFiniteObjective(NumericFailure):
    pass


class EmptyInput(JudgecalError):
    pass


class InsufficientData(JudgecalError):
    pass


class LengthMismatch(JudgecalError):
    pass


class TooFewRaters(JudgecalError):
    pass


class MissingOrder(JudgecalError):
    pass


class MixedItems(JudgecalError):
    pass


class MissingConfidence(JudgecalError):
    pass


class DuplicateLabel(JudgecalError):
    pass


class ParseError(JudgecalError):
    """Malformed input line. ``line`` is 1-based."""

    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")
