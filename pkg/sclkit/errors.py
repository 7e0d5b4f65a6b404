"""
Exception hierarchy for sclkit.

Outcomes that are part of an operation's contract (search results, geometry
check verdicts, isometry types) are returned as values; these exceptions are
reserved for bad input and violated preconditions.
"""

from typing import Any, Optional, Sequence


class SclkitError(Exception):
    """Base class for every error raised by sclkit."""


class MalformedInputError(SclkitError):
    def __init__(self, message: str, line: int = 0, column: int = 0, source: Optional[str] = None):
        self.line = line
        self.column = column
        self.source = source
        prefix = f"{source}:" if source else ""
        super().__init__(f"{prefix}{line}:{column}: {message}")


class GeneratorRangeError(SclkitError):
    pass


class RankMismatchError(SclkitError):
    pass


class NotInCommutatorSubgroupError(SclkitError):
    pass


class SegmentTooShortError(SclkitError):
    pass


class DisconnectedGraphError(SclkitError):
    pass


class NotATreeError(SclkitError):
    def __init__(self, message: str, cycle: Sequence[Any] = ()):
        self.cycle = list(cycle)
        super().__init__(f"{message}; witness cycle {self.cycle}")


class QuasiGeodesicError(SclkitError):
    def __init__(self, message: str, witness: Any = None):
        self.witness = witness
        super().__init__(f"{message}; witness {witness}")


class EllipticElementError(SclkitError):
    pass


class AxiomViolationError(SclkitError):
    def __init__(self, message: str, triple: Sequence[int] = ()):
        self.triple = tuple(triple)
        super().__init__(f"{message}; witness triple {self.triple}")


class PromotionError(SclkitError):
    pass


class PipelineStageError(SclkitError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")


class InconsistentClassError(SclkitError):
    """Representative data that no conjugacy relation can satisfy; located when read from a file."""

    def __init__(self, message: str, line: Optional[int] = None, column: int = 0, source: Optional[str] = None):
        self.line = line
        self.column = column
        self.source = source
        if line is not None:
            prefix = f"{source}:" if source else ""
            message = f"{prefix}{line}:{column}: {message}"
        super().__init__(message)


class VerdictError(SclkitError):
    pass


class ModeError(SclkitError):
    pass


class InvariantViolationError(SclkitError):
    pass
