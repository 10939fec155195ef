"""
Row- and column-dominant systems through one Eulerian solve.

A matrix M = diag(d) - A^T with nonnegative off-diagonal A is column dominant
when d >= row sums of A and row dominant when d >= column sums of A. Adding
a hub vertex that absorbs every row surplus and supplies every column surplus
turns M into an Eulerian Laplacian on n + 1 vertices whose leading block is M.
"""

import logging

import numpy as np

from numpy.typing import NDArray

from dirlap.core import DirectedLaplacian, SparseGraph, validate_laplacian
from dirlap.exceptions import (
    InnerSolverFailureError,
    NumericalError,
    ValidationError,
)
from dirlap.solver import InnerSolver

logger = logging.getLogger(__name__)

# Relative tolerance on negative surpluses
SURPLUS_RTOL = 1e-12


def _surplus(
    diagonal: NDArray[np.float64], sums: NDArray[np.float64], side: str
) -> NDArray[np.float64]:
    surplus = diagonal - sums
    scale = max(float(np.abs(diagonal).max(initial=0.0)), 1e-300)
    if np.any(surplus < -SURPLUS_RTOL * scale):
        vertex = int(np.argmin(surplus))
        raise ValidationError(
            f"Matrix is not {side} dominant at vertex {vertex}",
            vertex=vertex,
            surplus=float(surplus[vertex]),
        )
    return np.maximum(surplus, 0.0)


def dominant_patch(
    adjacency: SparseGraph, diagonal: NDArray[np.float64]
) -> DirectedLaplacian:
    """
    Eulerian Laplacian on n + 1 vertices whose leading n x n block is M.

    Parameters
    ----------
    adjacency : SparseGraph
        Off-diagonal part A of M = diag(diagonal) - A^T, without self-loops.
    diagonal : numpy.ndarray
        Diagonal d of M.

    Returns
    -------
    DirectedLaplacian
        Vertex n is the hub: i -> hub carries the column surplus of i and
        hub -> i carries its row surplus.

    Raises
    ------
    ValidationError
        If M is not row and column diagonally dominant.

    """
    n = adjacency.n
    to_hub = _surplus(diagonal, adjacency.row_sums(), "column")
    from_hub = _surplus(diagonal, adjacency.col_sums(), "row")
    index = np.arange(n)
    hub = np.full(n, n)
    patched = SparseGraph(
        n + 1,
        np.concatenate([adjacency.rows, index, hub]),
        np.concatenate([adjacency.cols, hub, index]),
        np.concatenate([adjacency.weights, to_hub, from_hub]),
    )
    average = float(patched.row_sums().sum()) / (n + 1)
    return validate_laplacian(patched, tol_eul=1e-10 * max(average, 1e-300))


def solve_dominant(
    adjacency: SparseGraph,
    diagonal: NDArray[np.float64],
    b: NDArray[np.float64],
    eps: float,
    inner: InnerSolver,
) -> NDArray[np.float64]:
    """
    Solve M z = b for a row- and column-dominant M with one Eulerian solve.

    The patched system is solved with demand [b; -sum(b)] and the hub
    potential is subtracted from the first n entries.

    Raises
    ------
    InnerSolverFailureError
        If the inner solver fails numerically or returns non-finite values.

    """
    patched = dominant_patch(adjacency, diagonal)
    demand = np.append(b, -float(np.sum(b)))
    logger.debug(
        "Dominant system: n = %d, patched nnz = %d, inner eps = %.3e",
        adjacency.n,
        patched.nnz,
        eps,
    )
    try:
        potentials = np.asarray(inner(patched, demand, eps), dtype=np.float64)
    except NumericalError as exc:
        raise InnerSolverFailureError(
            f"Inner Eulerian solve failed: {exc}", cause=type(exc).__name__
        ) from exc
    if potentials.shape != demand.shape or not np.all(np.isfinite(potentials)):
        raise InnerSolverFailureError(
            "Inner Eulerian solver returned an invalid vector",
            shape=list(potentials.shape),
        )
    return potentials[:-1] - potentials[-1]
