from typing import Any


class DirlapWarning(Warning):
    """Base class for all dirlap warnings."""


class DemandProjectedWarning(DirlapWarning):
    """Emitted when a right-hand side is moved onto the image of an operator."""


class DirlapError(Exception):
    """Base class for all dirlap errors."""

    details: dict[str, Any]

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details


class UsageError(DirlapError):
    """Raised when the command line is invalid."""


class ValidationError(DirlapError):
    """Base class for errors caused by invalid input."""


class NegativeWeightError(ValidationError):
    """Raised when an adjacency matrix has a negative entry."""


class NonFiniteError(ValidationError):
    """Raised when a matrix or vector has NaN or infinite entries."""


class SelfLoopError(ValidationError):
    """Raised when a Laplacian adjacency has diagonal entries."""


class ZeroDegreeVertexError(ValidationError):
    """Raised when normalization needs a positive out-degree everywhere."""


class ZeroKernelVectorError(ValidationError):
    """Raised when projecting against a zero kernel vector."""


class EmptyMatrixError(ValidationError):
    """Raised when an operation needs at least one nonzero entry."""


class NotEulerianError(ValidationError):
    """Raised when in-degrees and out-degrees differ."""


class NotStronglyConnectedError(ValidationError):
    """Raised when the graph on the support is not strongly connected."""


class NormMismatchError(ValidationError):
    """Raised when the two factors of a product Laplacian have different mass."""


class RowColMismatchError(ValidationError):
    """Raised when a walk matrix has different row and column sums."""


class EmptySetError(ValidationError):
    """Raised when a vertex set is empty."""


class FullSetError(ValidationError):
    """Raised when a vertex set contains every vertex."""


class KernelMismatchError(ValidationError):
    """Raised when two PSD matrices do not share a kernel."""


class DimensionCapError(ValidationError):
    """Raised when a dense computation exceeds the dimension cap."""


class NotPSDSymmetrizationError(ValidationError):
    """Raised when the symmetrization of a matrix is not PSD."""


class NumericalError(DirlapError):
    """Base class for numerical failures (exhausted budgets, drift, divergence)."""


class DeficitMismatchError(NumericalError):
    """Raised when row and column deficits of a patch do not balance."""


class OversampleExhaustedError(NumericalError):
    """Raised when every resample failed the verification norm."""


class NonterminatingDecompositionError(NumericalError):
    """Raised when a weight bucket exceeds its round limit."""


class ChainKernelDriftError(NumericalError):
    """Raised when a chain walk no longer fixes the kernel vector."""


class RecursionBudgetExceededError(NumericalError):
    """Raised when a solve exceeds its operator-application budget."""


class LambdaEstimateFailedError(NumericalError):
    """Raised when inverse powering cannot bound the smallest nonzero eigenvalue."""


class InnerSolverFailureError(NumericalError):
    """Raised when an inner Eulerian solve fails or returns garbage."""


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64


def exit_code_for(exc: BaseException) -> int:
    """
    Map an exception to a command line exit code.

    Parameters
    ----------
    exc : BaseException
        Exception raised by a command.

    Returns
    -------
    int
        2 for invalid input, 3 for numerical failures, 64 for usage errors.

    Raises
    ------
    BaseException
        Re-raises anything that is not a dirlap error.

    """
    match exc:
        case UsageError():
            return EXIT_USAGE
        case ValidationError():
            return EXIT_VALIDATION
        case NumericalError():
            return EXIT_NUMERICAL
        case DirlapError():
            return EXIT_NUMERICAL
        case _:
            raise exc
