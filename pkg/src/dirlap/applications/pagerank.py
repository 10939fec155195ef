import logging

import numpy as np

from numpy.typing import ArrayLike, NDArray
from scipy.sparse.csgraph import breadth_first_order

from dirlap.config import APPLICATION_DEFAULT, ApplicationConfig
from dirlap.core import DirectedLaplacian, SparseGraph, validate_laplacian
from dirlap.events import EventBus
from dirlap.exceptions import NonFiniteError, ValidationError
from dirlap.solver import InnerSolver

from .stationary import StationaryResult, compute_stationary

logger = logging.getLogger(__name__)


def _check_personalization(values: ArrayLike, n: int) -> NDArray[np.float64]:
    personalization = np.asarray(values, dtype=np.float64).ravel()
    if len(personalization) != n:
        raise ValueError(
            f"Personalization has length {len(personalization)}, expected {n}"
        )
    if not np.all(np.isfinite(personalization)):
        raise NonFiniteError("Personalization entries must be finite")
    if np.any(personalization < 0) or not abs(personalization.sum() - 1) <= 1e-9:
        raise ValidationError("Personalization must be a probability distribution")
    return personalization


def restart_graph(
    laplacian: DirectedLaplacian, beta: float, personalization: NDArray[np.float64]
) -> SparseGraph:
    """
    Walk with restarts as a graph on n + 1 vertices.

    Vertex i keeps (1 - beta) of its out-degree on its edges and sends beta of
    it to the hub n (all of it when i is dangling); the hub jumps to j with
    weight personalization_j.
    """
    n = laplacian.n
    adjacency = laplacian.adjacency.offdiagonal()
    degrees = adjacency.row_sums()
    to_hub = np.where(degrees > 0, beta * degrees, 1.0)
    index = np.arange(n)
    hub = np.full(n, n)
    kept = adjacency.scale(1 - beta)
    return SparseGraph(
        n + 1,
        np.concatenate([kept.rows, index, hub]),
        np.concatenate([kept.cols, hub, index]),
        np.concatenate([kept.weights, to_hub, personalization]),
    )


def personalized_pagerank(
    laplacian: DirectedLaplacian,
    beta: float,
    personalization: ArrayLike,
    eps: float | None = None,
    inner: InnerSolver | None = None,
    *,
    config: ApplicationConfig = APPLICATION_DEFAULT,
    event_bus: EventBus | None = None,
) -> NDArray[np.float64]:
    """
    Personalized PageRank of the random walk of L.

    The PageRank vector is the stationary distribution of the restart graph
    restricted to the first n vertices and renormalized. Vertices that the
    walk cannot reach from the personalization support get zero mass.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Any directed Laplacian; dangling vertices jump by the personalization.
    beta : float
        Restart probability in (0, 1].
    personalization : ArrayLike
        Restart distribution.
    eps : float, optional
        Inner accuracy of the stationary computation.
    inner : InnerSolver, optional
        Eulerian solver handle. By default `solve_eulerian`.
    config : ApplicationConfig, optional
    event_bus : EventBus, optional

    Returns
    -------
    numpy.ndarray
        Nonnegative vector summing to 1.

    """
    if not 0 < beta <= 1:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    n = laplacian.n
    restart = _check_personalization(personalization, n)
    if beta == 1:
        return restart.copy()

    graph = restart_graph(laplacian, beta, restart)
    reachable = np.sort(breadth_first_order(graph.csgraph, n, directed=True)[0])
    mask = np.zeros(n + 1, dtype=bool)
    mask[reachable] = True
    logger.debug(
        "PageRank: beta = %.3g, %d of %d vertices reachable from the restart set",
        beta,
        len(reachable) - 1,
        n,
    )
    relabel = np.full(n + 1, -1, dtype=np.int64)
    relabel[reachable] = np.arange(len(reachable))
    keep = mask[graph.rows] & mask[graph.cols]
    restricted = SparseGraph(
        len(reachable),
        relabel[graph.rows[keep]],
        relabel[graph.cols[keep]],
        graph.weights[keep],
    )
    stationary: StationaryResult = compute_stationary(
        validate_laplacian(restricted),
        config.stationary_alpha,
        inner,
        eps=eps,
        config=config,
        event_bus=event_bus,
    )
    ranks = np.zeros(n + 1)
    ranks[reachable] = stationary.distribution
    ranks = ranks[:n]
    return ranks / float(ranks.sum())
