"""Exception hierarchy shared by all kamp modules."""


class KampError(Exception):
    """Base class for all errors raised by this package."""


class InsufficientPointsError(KampError):
    """A pattern or marked subset has too few points for the requested statistic."""


class IdenticalMarksError(KampError):
    """A bivariate query named the same mark twice."""


class GridMismatchError(KampError):
    """Two curves that must share a radius grid do not."""


class RadiusNotOnGridError(KampError):
    """A requested evaluation radius is not on the result grid."""


class DegeneratePairError(KampError):
    """A pair displacement equals or exceeds the window extent (corrupt input)."""


class InfeasibleAbundanceError(KampError):
    """The clustered-simulation calibration cannot reach the target abundance."""


class InternalConsistencyError(KampError):
    """A computed quantity violated an internal invariant beyond float tolerance."""


class EnumerationTooLargeError(KampError):
    """Exact enumeration requested for a pattern above the enumeration bound."""


class IngestError(KampError):
    """Base class for tabular ingestion failures."""


class MissingColumnError(IngestError):
    """A required column is absent from the input header."""


class EmptySampleError(IngestError):
    """A sample has fewer than two valid cells after parsing."""


class RowParseError(IngestError):
    """A data row could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
