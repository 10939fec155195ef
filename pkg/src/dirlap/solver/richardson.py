import numpy as np

from numpy.typing import NDArray
from scipy.sparse.linalg import LinearOperator

from .operators import ImplicitOperator


def precon_richardson(
    M: LinearOperator,
    Z: LinearOperator,
    b: NDArray[np.float64],
    eta: float,
    iterations: int,
) -> NDArray[np.float64]:
    """
    Preconditioned Richardson iteration.

    Starting from x_0 = 0, computes x_{k+1} = x_k + eta Z (b - M x_k) and
    returns x_N. The map b -> x_N is linear.

    Parameters
    ----------
    M : LinearOperator
        System operator.
    Z : LinearOperator
        Preconditioner, an approximate pseudoinverse of M.
    b : numpy.ndarray
        Right-hand side in the image of M.
    eta : float
        Step size.
    iterations : int
        N, nonnegative.

    Returns
    -------
    numpy.ndarray

    """
    if iterations < 0:
        raise ValueError(f"Iteration count must be nonnegative, got {iterations}")
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    for step in range(iterations):
        residual = b if step == 0 else b - M.matvec(x)
        x = x + eta * Z.matvec(residual)
    return x


def richardson_operator(
    M: ImplicitOperator,
    Z: LinearOperator,
    eta: float,
    iterations: int,
    name: str = "richardson",
) -> ImplicitOperator:
    """The linear operator b -> precon_richardson(M, Z, b, eta, iterations)."""
    cost = max(iterations - 1, 0) * M.cost + iterations * getattr(Z, "cost", 0)
    return ImplicitOperator(
        lambda b: precon_richardson(M, Z, b, eta, iterations),
        M.shape[0],
        kernel=M.kernel,
        cost=cost,
        name=name,
    )
