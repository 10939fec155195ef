import logging
import math
import threading

from typing import Callable

import numpy as np

from numpy.typing import NDArray
from scipy.sparse.linalg import LinearOperator

from dirlap.core import SparseGraph
from dirlap.exceptions import RecursionBudgetExceededError

logger = logging.getLogger(__name__)


class OperatorBudget:
    """
    Counter of primitive sparse matrix-vector products shared by one solve.

    Parameters
    ----------
    limit : float
        Products allowed before RecursionBudgetExceededError is raised.

    """

    __slots__ = ("limit", "used", "_lock")

    limit: float
    used: int

    def __init__(self, limit: float = math.inf) -> None:
        self.limit = limit
        self.used = 0
        self._lock = threading.Lock()

    @classmethod
    def for_chain(cls, n: int, d: int, c_budget: float) -> "OperatorBudget":
        """Budget c_budget * n * 2^(3 sqrt(d ln d)) for a chain of length d."""
        exponent = 3 * math.sqrt(d * math.log(d)) if d >= 2 else 0.0
        return cls(c_budget * n * 2.0**exponent)

    def charge(self, count: int = 1) -> None:
        with self._lock:
            self.used += count
            if self.used > self.limit:
                raise RecursionBudgetExceededError(
                    f"Operator budget of {self.limit:.3g} applications exceeded",
                    limit=self.limit,
                    used=self.used,
                )

    def __repr__(self) -> str:
        return f"OperatorBudget(used={self.used}, limit={self.limit:.3g})"


class ImplicitOperator(LinearOperator):
    """
    Square linear operator given by a routine, with a declared kernel.

    Inputs are projected orthogonally to the kernel before the routine runs
    and outputs are projected again, so the operator annihilates the kernel
    and maps into its orthogonal complement.

    Parameters
    ----------
    apply : Callable[[numpy.ndarray], numpy.ndarray]
        Routine applying the operator to a vector.
    n : int
        Dimension.
    kernel : numpy.ndarray, optional
        Unit kernel vector. None means no projection.
    cost : int, optional
        Primitive products performed by one application.
    name : str, optional
        Label used in logs.

    """

    def __init__(
        self,
        apply: Callable[[NDArray[np.float64]], NDArray[np.float64]],
        n: int,
        kernel: NDArray[np.float64] | None = None,
        cost: int = 0,
        name: str = "operator",
    ) -> None:
        super().__init__(dtype=np.float64, shape=(n, n))
        self._apply = apply
        self.kernel = kernel
        self.cost = cost
        self.name = name

    def project(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.kernel is None:
            return x
        return x - (self.kernel @ x) * self.kernel

    def apply(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.project(self._apply(self.project(np.asarray(x, dtype=np.float64))))

    def _matvec(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.apply(np.ravel(x))

    def __repr__(self) -> str:
        return f"ImplicitOperator({self.name!r}, n={self.shape[0]}, cost={self.cost})"


def identity_minus_walk(
    walk: SparseGraph,
    kernel: NDArray[np.float64],
    budget: OperatorBudget | None = None,
) -> ImplicitOperator:
    """I - W as an implicit operator."""

    def apply(x: NDArray[np.float64]) -> NDArray[np.float64]:
        if budget is not None:
            budget.charge()
        return x - walk.matvec(x)

    return ImplicitOperator(apply, walk.n, kernel=kernel, cost=1, name="I - W")


def scaled_identity(
    n: int, factor: float, kernel: NDArray[np.float64] | None = None
) -> ImplicitOperator:
    return ImplicitOperator(
        lambda x: factor * x, n, kernel=kernel, cost=0, name=f"{factor:.3g} I"
    )
