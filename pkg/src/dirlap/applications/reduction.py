"""
Condition-number reduction for Eulerian solves.

Edges of the symmetrization are grouped into weight scales. At every scale
the vertices joined by heavier edges are contracted, the contracted system is
regularized by a small multiple of the identity, and the demand left over
after the solve is projected onto vectors summing to zero on every
component. Each contracted system is polynomially conditioned even when the
input spans many orders of magnitude of edge weights.
"""

import logging

from dataclasses import dataclass, field

import numpy as np

from numpy.typing import ArrayLike, NDArray
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree

from dirlap.config import APPLICATION_DEFAULT, ApplicationConfig
from dirlap.core import DirectedLaplacian, SparseGraph, project_orthogonal
from dirlap.events import EventBus, ScaleLevelEvent, publish
from dirlap.exceptions import NotEulerianError
from dirlap.solver import InnerSolver, default_inner_solver, prepare_demand

from ._patch import solve_dominant

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaleLevel:
    """
    One contraction of the ladder.

    Attributes
    ----------
    threshold : float
        Edges of weight >= threshold in the symmetrization are contracted.
    labels : numpy.ndarray
        Supernode of every vertex.
    components : int
        Number of supernodes.
    regularizer : float
        threshold / r^2.

    """

    threshold: float
    labels: NDArray[np.int64]
    components: int
    regularizer: float

    def contract(self, values: NDArray[np.float64]) -> NDArray[np.float64]:
        """C v: sum of the entries of every supernode."""
        return np.bincount(self.labels, weights=values, minlength=self.components)

    def expand(self, values: NDArray[np.float64]) -> NDArray[np.float64]:
        """C^T y."""
        return values[self.labels]

    def project(self, values: NDArray[np.float64]) -> NDArray[np.float64]:
        """Orthogonal projection onto the kernel of C."""
        sizes = np.bincount(self.labels, minlength=self.components)
        return values - self.expand(self.contract(values) / sizes)

    def contract_graph(self, adjacency: SparseGraph) -> SparseGraph:
        """Adjacency of C L C^T with self-loops dropped."""
        rows = self.labels[adjacency.rows]
        cols = self.labels[adjacency.cols]
        keep = rows != cols
        return SparseGraph(
            self.components, rows[keep], cols[keep], adjacency.weights[keep]
        )


@dataclass(frozen=True)
class ScaleLadder:
    """
    Weight scales w^(0) < w^(1) < ... with their contractions.

    Attributes
    ----------
    r : float
        Scale separation.
    levels : list[ScaleLevel]

    """

    r: float
    levels: list[ScaleLevel] = field(default_factory=list)

    @property
    def thresholds(self) -> list[float]:
        return [level.threshold for level in self.levels]


def _undirected_weights(laplacian: DirectedLaplacian) -> SparseGraph:
    adjacency = laplacian.adjacency.offdiagonal()
    return (adjacency + adjacency.transpose()).scale(0.5)


def build_scale_ladder(
    laplacian: DirectedLaplacian,
    r: float | None = None,
    *,
    config: ApplicationConfig = APPLICATION_DEFAULT,
) -> ScaleLadder:
    """
    Weight scales of the symmetrization and their contractions.

    w^(0) is the smallest weight of a maximum spanning forest. After the
    level at w^(i), w' is the smallest weight >= w^(i) and w^(i+1) = 2 w';
    the ladder ends at the first level with no weight >= w^(i). Equal
    weights therefore share one scale.

    Parameters
    ----------
    laplacian : DirectedLaplacian
    r : float, optional
        Scale separation. By default `config.scale_for(n)`.
    config : ApplicationConfig, optional

    Returns
    -------
    ScaleLadder

    """
    n = laplacian.n
    r = r if r is not None else config.scale_for(n)
    undirected = _undirected_weights(laplacian)
    if undirected.nnz == 0:
        return ScaleLadder(r=r, levels=[])
    inverse = SparseGraph(
        n, undirected.rows, undirected.cols, 1 / undirected.weights
    )
    forest = minimum_spanning_tree(inverse.csgraph)
    threshold = float(1 / forest.data.max())
    weights = np.unique(undirected.weights)

    levels = []
    while True:
        heavy = undirected.weights >= threshold
        graph = SparseGraph(
            n,
            undirected.rows[heavy],
            undirected.cols[heavy],
            undirected.weights[heavy],
        )
        count, labels = connected_components(graph.csgraph, directed=False)
        levels.append(
            ScaleLevel(
                threshold=threshold,
                labels=labels.astype(np.int64),
                components=int(count),
                regularizer=threshold / r**2,
            )
        )
        logger.debug(
            "Scale level %d: threshold %.3e, %d components",
            len(levels) - 1,
            threshold,
            count,
        )
        index = int(np.searchsorted(weights, threshold, side="left"))
        if index == len(weights):
            break
        threshold = 2 * float(weights[index])
    return ScaleLadder(r=r, levels=levels)


def crude_solve_ill_conditioned(
    laplacian: DirectedLaplacian,
    b: ArrayLike,
    inner: InnerSolver | None = None,
    *,
    r: float | None = None,
    eps: float | None = None,
    config: ApplicationConfig = APPLICATION_DEFAULT,
    event_bus: EventBus | None = None,
) -> NDArray[np.float64]:
    """
    Crude solve of an Eulerian system through polynomially conditioned ones.

    For every level of the scale ladder, z = C^T (C L C^T + w / r^2 I)^{-1} C b
    is added to x and the demand becomes Proj(b - L z). The result satisfies
    ||x - L^+ b||_U <= ||L^+ b||_U / 2 in the symmetrization norm.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Eulerian Laplacian.
    b : ArrayLike
        Demand; projected orthogonally to the all-ones vector if needed.
    inner : InnerSolver, optional
        Eulerian solver handle used on the patched contracted systems.
    r : float, optional
        Scale separation. By default `config.scale_for(n)`.
    eps : float, optional
        Inner accuracy, by default 1 / r.
    config : ApplicationConfig, optional
    event_bus : EventBus, optional
        Receives a ScaleLevelEvent for every contracted system.

    Returns
    -------
    numpy.ndarray

    Raises
    ------
    NotEulerianError
        If the Laplacian is not Eulerian.
    InnerSolverFailureError
        If an inner solve fails.

    """
    if not laplacian.eulerian:
        raise NotEulerianError("Scale reduction needs an Eulerian Laplacian")
    demand, _ = prepare_demand(laplacian, b)
    n = laplacian.n
    if not np.any(demand):
        return np.zeros(n)
    ladder = build_scale_ladder(laplacian, r, config=config)
    inner = inner or default_inner_solver()
    inner_eps = eps if eps is not None else 1 / ladder.r
    adjacency = laplacian.adjacency.offdiagonal()

    x = np.zeros(n)
    for index, level in enumerate(ladder.levels):
        contracted = level.contract_graph(adjacency)
        publish(
            event_bus,
            ScaleLevelEvent(
                type="scale_level",
                level=index,
                threshold=level.threshold,
                components=level.components,
                regularizer=level.regularizer,
                edges=[
                    (int(i), int(j), float(w))
                    for i, j, w in zip(
                        contracted.rows,
                        contracted.cols,
                        contracted.weights,
                        strict=True,
                    )
                ],
            ),
        )
        reduced = level.contract(demand)
        if not np.any(np.abs(reduced) > 1e-300):
            logger.debug("Scale level %d: no demand across components", index)
            demand = level.project(demand)
            continue
        y = solve_dominant(
            contracted,
            contracted.row_sums() + level.regularizer,
            reduced,
            inner_eps,
            inner,
        )
        z = level.expand(y)
        x = x + z
        demand = level.project(demand - laplacian.matvec(z))
    return project_orthogonal(x, np.ones(n))
