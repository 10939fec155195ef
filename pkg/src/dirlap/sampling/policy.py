import logging

from typing import Callable, TypedDict

from dirlap.events import EventBus, ResampleEvent, publish
from dirlap.exceptions import DeficitMismatchError, OversampleExhaustedError

from .rules import ExceptionRule, OutcomeRule, SampleOutcome, exceeds_tolerance

logger = logging.getLogger(__name__)


class ResampleBase:
    __slots__ = ("outcome_rules", "exception_rules", "max_resamples")

    outcome_rules: list[OutcomeRule]
    exception_rules: list[ExceptionRule]
    max_resamples: int

    def __init__(
        self,
        outcome_rules: list[OutcomeRule] | None = None,
        exception_rules: list[ExceptionRule] | None = None,
        max_resamples: int = 3,
    ) -> None:
        self.outcome_rules = outcome_rules or []
        self.exception_rules = exception_rules or []
        self.max_resamples = max_resamples


class ResampleCounts(TypedDict):
    total: int
    exception: dict[ExceptionRule, int]
    outcome: dict[OutcomeRule, int]


class ResampleContext(ResampleBase):
    """Context for handling resamples of a single sampling call."""

    __slots__ = ("resample_count",)

    resample_count: ResampleCounts

    def __init__(
        self,
        outcome_rules: list[OutcomeRule],
        exception_rules: list[ExceptionRule],
        max_resamples: int,
    ) -> None:
        super().__init__(
            outcome_rules=outcome_rules,
            exception_rules=exception_rules,
            max_resamples=max_resamples,
        )
        self.resample_count = {
            "total": 0,
            "outcome": {rule: 0 for rule in self.outcome_rules},
            "exception": {rule: 0 for rule in self.exception_rules},
        }

    def draw_with_resamples(
        self,
        draw: Callable[[int], SampleOutcome],
        event_bus: EventBus | None = None,
    ) -> SampleOutcome:
        """
        Draw a sample and redraw it in accordance with the resample policy.

        Emits ResampleEvent before every redraw.

        Parameters
        ----------
        draw : Callable[[int], SampleOutcome]
            Draws a sample for the given attempt number. Attempts must use
            independent random streams.
        event_bus : EventBus, optional
            Event bus to publish events.

        Returns
        -------
        SampleOutcome
            First outcome not rejected by any rule.

        Raises
        ------
        OversampleExhaustedError
            If an outcome is still rejected once resamples are exhausted.

        """
        while True:
            attempt = self.resample_count["total"]
            try:
                outcome = draw(attempt)
            except Exception as exc:
                if self.should_resample(exc):
                    logger.warning("Resampling after %s: %s", type(exc).__name__, exc)
                    publish(
                        event_bus,
                        ResampleEvent(type="resample", attempt=attempt, exception=exc),
                    )
                    continue
                raise
            if self.should_resample(outcome):
                logger.warning(
                    "Resampling: estimated norm %.3e exceeds eps = %.3e",
                    outcome.norm,
                    outcome.eps,
                )
                publish(
                    event_bus,
                    ResampleEvent(type="resample", attempt=attempt, norm=outcome.norm),
                )
                continue
            if any(rule.rejects(outcome) for rule in self.outcome_rules):
                raise OversampleExhaustedError(
                    f"Sample rejected after {attempt} resamples "
                    f"(norm {outcome.norm}, eps {outcome.eps})",
                    attempts=attempt + 1,
                    norm=outcome.norm,
                    eps=outcome.eps,
                )
            return outcome

    def should_resample(self, value: SampleOutcome | Exception) -> bool:
        """
        Determine if the sample should be redrawn.

        If so, the total resample count and the count of the responsible rule
        are incremented.

        """
        if self.resample_count["total"] >= self.max_resamples:
            return False
        condition: bool = False
        match value:
            case SampleOutcome():
                condition = self.__evaluate_outcome_rules(value)
            case Exception():
                condition = self.__evaluate_exception_rules(value)
            case _:  # pragma: no cover
                raise TypeError("Value must be a SampleOutcome or an Exception")
        if condition:
            self.resample_count["total"] += 1
        return condition

    def __evaluate_outcome_rules(self, outcome: SampleOutcome) -> bool:
        for rule in self.outcome_rules:
            if self.resample_count["outcome"][
                rule
            ] < rule.max_resamples and rule.rejects(outcome):
                self.resample_count["outcome"][rule] += 1
                return True
        return False

    def __evaluate_exception_rules(self, exception: Exception) -> bool:
        for rule in self.exception_rules:
            if self.resample_count["exception"][rule] >= rule.max_resamples:
                continue
            if rule.should_resample(exception):
                self.resample_count["exception"][rule] += 1
                return True
        return False


class ResamplePolicy(ResampleBase):
    """
    Policy for redrawing random samples.

    Parameters
    ----------
    outcome_rules : list[OutcomeRule], optional
        Rules for redrawing based on the sample outcome.
    exception_rules : list[ExceptionRule], optional
        Rules for redrawing after an exception.
    max_resamples : int, optional
        Maximum total number of resamples. By default 3.

    """

    def create_context(self) -> ResampleContext:
        """Create a new resample context for a single sampling call."""
        return ResampleContext(
            outcome_rules=self.outcome_rules,
            exception_rules=self.exception_rules,
            max_resamples=self.max_resamples,
        )


def default_policy(max_resamples: int = 3) -> ResamplePolicy:
    """Resample on a failed norm check or an unbalanced patch."""
    return ResamplePolicy(
        outcome_rules=[OutcomeRule(exceeds_tolerance, max_resamples=max_resamples)],
        exception_rules=[
            ExceptionRule(DeficitMismatchError, max_resamples=max_resamples)
        ],
        max_resamples=max_resamples,
    )


POLICY_DEFAULT = default_policy()
