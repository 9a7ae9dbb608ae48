"""Exception types shared across the package."""


class DppSelectError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(DppSelectError, ValueError):
    """An argument violates a documented precondition."""


class InvalidMatrix(InvalidInput):
    """A matrix is not square, not finite, or not exactly symmetric."""


class OracleTooLarge(DppSelectError):
    """Exhaustive subset enumeration was requested for too many items."""


class DivergenceError(DppSelectError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class DegeneratePool(DppSelectError):
    """Mean pooling collapsed to the zero vector."""


class DegenerateProjection(DppSelectError):
    """A projection produced the zero vector and cannot be normalized."""


class UndefinedMetric(DppSelectError):
    """The metric is undefined for the given input (e.g. empty selection)."""


class IngestError(DppSelectError):
    """A malformed input line. Carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")
