"""Error hierarchy shared by every tool package.

Each class carries the process exit code the CLI reports for it.
"""
from typing import Any, Optional


class ModeScatterError(Exception):
    exit_code = 1

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def as_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message, **self.details}


class ThresholdError(ModeScatterError):
    exit_code = 10


class ModeCutoffError(ModeScatterError):
    exit_code = 11


class BasisMismatchError(ModeScatterError):
    exit_code = 12


class ConvergenceError(ModeScatterError):
    exit_code = 13


class NotPropagatingError(ModeScatterError):
    exit_code = 14


class SingularSystemError(ModeScatterError):
    exit_code = 20


class STConditionError(ModeScatterError):
    exit_code = 21


class PositivityError(ModeScatterError):
    exit_code = 22


class NoBoundStateError(ModeScatterError):
    exit_code = 23


class MarginError(ModeScatterError):
    exit_code = 24


class IncompleteDataError(ModeScatterError):
    exit_code = 30


class InsufficientSamplesError(ModeScatterError):
    exit_code = 40


class PoleInWindowError(ModeScatterError):
    exit_code = 41


class ExtrapolationRangeError(ModeScatterError):
    exit_code = 42


class IllConditionedSpanError(ModeScatterError):
    exit_code = 50


class BandCoverageError(ModeScatterError):
    exit_code = 51


class CFLViolationError(ModeScatterError):
    exit_code = 52


class ParseError(ModeScatterError):
    exit_code = 60


class ThresholdCollisionError(ModeScatterError):
    exit_code = 61


AUDIT_FAILURE_EXIT_CODE = 3
