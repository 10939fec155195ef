from dataclasses import dataclass
from typing import Callable, Generic, TypeVar

from dirlap.core import SparseGraph
from dirlap.exceptions import OversampleExhaustedError

E = TypeVar("E", bound=Exception)


@dataclass(frozen=True)
class SampleOutcome:
    """
    Result of one sampling attempt.

    Parameters
    ----------
    graph : SparseGraph
        Patched sample.
    eps : float
        Accuracy the sample was drawn for.
    norm : float | None
        Estimated normalized error, None when verification is off.

    """

    graph: SparseGraph
    eps: float
    norm: float | None = None


def exceeds_tolerance(outcome: SampleOutcome) -> bool:
    """True when the verified norm is above the requested accuracy."""
    return outcome.norm is not None and outcome.norm > outcome.eps


class OutcomeRule:
    """
    Rule for deciding if a sample should be redrawn based on its outcome.

    Parameters
    ----------
    func : Callable[[SampleOutcome], bool]
        Predicate returning True when the outcome is rejected.
    max_resamples : int, optional
        Maximum number of resamples triggered by this rule. By default 3.

    """

    func: Callable[[SampleOutcome], bool]
    max_resamples: int

    def __init__(
        self,
        func: Callable[[SampleOutcome], bool],
        /,
        max_resamples: int = 3,
    ) -> None:
        self.func = func
        self.max_resamples = max_resamples

    def rejects(self, outcome: SampleOutcome) -> bool:
        return self.func(outcome)


class ExceptionRule(Generic[E]):
    """
    Rule for deciding if a sample should be redrawn after an exception.

    Parameters
    ----------
    exc_type : type[Exception]
        Type of exception to resample on.
    func : Callable[[Exception], bool] | None, optional
        Predicate deciding if the exception warrants a resample.
        By default the provided exception always does.
    max_resamples : int, optional
        Maximum number of resamples triggered by this rule. By default 3.

    """

    exception_type: type[E]
    func: Callable[[E], bool]
    max_resamples: int

    def __init__(
        self,
        exc_type: type[E],
        func: Callable[[E], bool] | None = None,
        /,
        max_resamples: int = 3,
    ) -> None:
        if issubclass(exc_type, OversampleExhaustedError):
            raise ValueError(
                "OversampleExhaustedError is raised after all resamples are "
                "exhausted and cannot itself trigger a resample."
            )
        if exc_type is Exception:
            raise ValueError("Resampling on built-in Exception is not allowed.")
        self.exception_type = exc_type
        self.func = func or (lambda _: True)
        self.max_resamples = max_resamples

    def should_resample(self, exc: Exception) -> bool:
        if not isinstance(exc, self.exception_type):
            return False
        return self.func(exc)
