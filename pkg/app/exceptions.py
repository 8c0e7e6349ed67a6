"""Custom exception classes for the application."""

from typing import Optional

from fastapi import status

EXIT_ANALYSIS_FAILURE = 1
EXIT_USAGE_ERROR = 2


class AppException(Exception):
    """Base class for every error the library raises on purpose.

    ``status_code`` is used by the HTTP layer, ``exit_code`` by the command-line tool.
    """

    status_code: int = status.HTTP_400_BAD_REQUEST
    exit_code: int = EXIT_USAGE_ERROR

    def __init__(self, detail: str) -> None:
        """Initialize the exception with a human-readable detail."""
        super().__init__(detail)
        self.detail = detail


class TableauParseError(AppException):
    """Raised when a tableau document cannot be parsed or is inconsistent."""

    status_code = status.HTTP_422_UNPROCESSABLE_ENTITY

    def __init__(self, reason: str, row: Optional[int] = None, column: Optional[int] = None, field: str = "A") -> None:
        """Initialize the exception with the offending location."""
        location = field
        if row is not None:
            location += f"[{row}]"
        if column is not None:
            location += f"[{column}]"
        super().__init__(f"Tableau error at {location}: {reason}")
        self.row = row
        self.column = column
        self.field = field


class StageSumMismatchError(TableauParseError):
    """Raised when a supplied abscissa vector disagrees with the row sums of A."""

    def __init__(self, index: int, supplied: str, expected: str) -> None:
        """Initialize the exception with the first mismatching entry."""
        super().__init__(f"c mismatch: supplied {supplied}, row sum of A is {expected}", row=index, field="c")


class TableauFileNotFoundError(AppException):
    """Raised when a tableau file does not exist."""

    status_code = status.HTTP_404_NOT_FOUND

    def __init__(self, path: str) -> None:
        """Initialize the exception with the path."""
        super().__init__(f"Tableau file '{path}' not found")


class UnknownCatalogEntryError(AppException):
    """Raised when a catalog name is not registered."""

    status_code = status.HTTP_404_NOT_FOUND

    def __init__(self, name: str, available: list[str]) -> None:
        """Initialize the exception with the requested and the known names."""
        super().__init__(f"Unknown tableau '{name}'. Available: {', '.join(available)}")


class TreeOrderOutOfRangeError(AppException):
    """Raised when a tree order is outside the supported range."""

    def __init__(self, order: int, low: int, high: int) -> None:
        """Initialize the exception with the order and the bounds."""
        super().__init__(f"Tree order {order} outside supported range [{low}, {high}]")


class TreeEncodingError(AppException):
    """Raised when a nested-bracket tree encoding is malformed."""

    def __init__(self, text: str, position: int, reason: str) -> None:
        """Initialize the exception with the text and failing position."""
        super().__init__(f"Invalid tree encoding '{text}' at position {position}: {reason}")


class InvalidVertexError(AppException):
    """Raised when a vertex path does not address a suppressible vertex."""

    def __init__(self, encoding: str, path: tuple[int, ...], reason: str) -> None:
        """Initialize the exception with the tree and vertex path."""
        super().__init__(f"Vertex {list(path)} of {encoding} cannot be suppressed: {reason}")


class SingleVertexTreeError(AppException):
    """Raised when an operation needs a tree with at least two vertices."""

    def __init__(self, operation: str) -> None:
        """Initialize the exception with the operation name."""
        super().__init__(f"'{operation}' is undefined for the single-vertex tree")


class UnknownTable1LabelError(AppException):
    """Raised when a condition-table label is not recognized."""

    status_code = status.HTTP_404_NOT_FOUND

    def __init__(self, label: str, available: list[str]) -> None:
        """Initialize the exception with the label."""
        super().__init__(f"Unknown condition label '{label}'. Available: {', '.join(available)}")


class UnknownProblemError(AppException):
    """Raised when a builtin problem name is not registered."""

    status_code = status.HTTP_404_NOT_FOUND

    def __init__(self, name: str, available: list[str]) -> None:
        """Initialize the exception with the requested and the known names."""
        super().__init__(f"Unknown problem '{name}'. Available: {', '.join(available)}")


class InvalidStiffnessError(AppException):
    """Raised when the stiffness parameter is not strictly negative."""

    def __init__(self, value: float) -> None:
        """Initialize the exception with the rejected value."""
        super().__init__(f"Stiffness parameter must be negative, got {value}")


class UnavailableDerivativeError(AppException):
    """Raised when a computation needs derivatives beyond the problem smoothness."""

    exit_code = EXIT_ANALYSIS_FAILURE

    def __init__(self, what: str, order: int, available: int) -> None:
        """Initialize the exception with the requested and available orders."""
        super().__init__(f"{what} of order {order} requested, problem provides up to {available}")


class SingularStageMatrixError(AppException):
    """Raised when a stage system is singular."""

    status_code = status.HTTP_422_UNPROCESSABLE_ENTITY
    exit_code = EXIT_ANALYSIS_FAILURE

    def __init__(self, context: str) -> None:
        """Initialize the exception with the failing context."""
        super().__init__(f"Singular stage matrix in {context}")


class NewtonConvergenceError(AppException):
    """Raised when the stage Newton iteration fails."""

    status_code = status.HTTP_422_UNPROCESSABLE_ENTITY
    exit_code = EXIT_ANALYSIS_FAILURE

    def __init__(self, stage: str, iterations: int, residual: float) -> None:
        """Initialize the exception with the stage and the last increment."""
        super().__init__(f"Newton iteration for stage {stage} did not converge in {iterations} iterations "
                         f"(last increment {residual:.3e})")
        self.stage = stage
        self.iterations = iterations
        self.residual = residual


class StepFailedError(AppException):
    """Raised when integration aborts at a step."""

    status_code = status.HTTP_422_UNPROCESSABLE_ENTITY
    exit_code = EXIT_ANALYSIS_FAILURE

    def __init__(self, index: int, time: float, reason: str) -> None:
        """Initialize the exception with the failing step."""
        super().__init__(f"Step {index} at t={time:.6g} failed: {reason}")
        self.index = index


class IncommensurateStepError(AppException):
    """Raised when the interval is not an integer number of steps."""

    def __init__(self, t0: float, tf: float, h: float) -> None:
        """Initialize the exception with the interval and step."""
        super().__init__(f"Interval [{t0}, {tf}] is not an integer multiple of h={h}")


class InvalidGridError(AppException):
    """Raised when a step-size or stiffness grid is malformed."""

    def __init__(self, spec: str, reason: str) -> None:
        """Initialize the exception with the grid text."""
        super().__init__(f"Invalid grid '{spec}': {reason}")


class InsufficientDataError(AppException):
    """Raised when an order fit has fewer than three usable points."""

    exit_code = EXIT_ANALYSIS_FAILURE

    def __init__(self, usable: int) -> None:
        """Initialize the exception with the number of usable points."""
        super().__init__(f"Order fit needs at least 3 usable points, got {usable}")


class StudyFileError(AppException):
    """Raised when a study table cannot be read back."""

    def __init__(self, reason: str) -> None:
        """Initialize the exception."""
        super().__init__(f"Malformed study table: {reason}")


class ProblemValidationError(AppException):
    """Raised when a builtin problem fails its own consistency checks."""

    status_code = status.HTTP_422_UNPROCESSABLE_ENTITY
    exit_code = EXIT_ANALYSIS_FAILURE

    def __init__(self, name: str, failures: list[str]) -> None:
        """Initialize the exception with the failed checks."""
        super().__init__(f"Problem '{name}' failed validation: {'; '.join(failures)}")


class TableauSourceError(AppException):
    """Raised when not exactly one tableau source is given."""

    def __init__(self) -> None:
        """Initialize the exception."""
        super().__init__("Give exactly one tableau source: a catalog name or a tableau file")
