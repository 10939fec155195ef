import logging

from functools import cached_property

import numpy as np
import scipy.sparse as sp

from numpy.typing import ArrayLike, NDArray
from scipy.sparse.csgraph import connected_components

from dirlap.exceptions import (
    NotStronglyConnectedError,
    SelfLoopError,
    ValidationError,
    ZeroDegreeVertexError,
    ZeroKernelVectorError,
)

from .graph import SparseGraph

logger = logging.getLogger(__name__)

# Relative Eulerian tolerance, scaled by the average degree Tr(D) / n
TOL_EUL = 1e-12


class DirectedLaplacian:
    """
    Directed Laplacian L = D - A^T.

    `A[i, j]` is the weight of the edge i -> j and `D` holds out-degrees,
    so every column of L sums to zero. The Laplacian is Eulerian when its
    rows also sum to zero (in-degree equals out-degree everywhere).

    Use `validate_laplacian` to build one from a graph.
    """

    adjacency: SparseGraph
    out_degrees: NDArray[np.float64]
    eulerian: bool
    tol_eul: float

    def __init__(
        self,
        adjacency: SparseGraph,
        out_degrees: NDArray[np.float64],
        eulerian: bool,
        tol_eul: float,
    ) -> None:
        self.adjacency = adjacency
        self.out_degrees = out_degrees
        self.out_degrees.setflags(write=False)
        self.eulerian = eulerian
        self.tol_eul = tol_eul

    @property
    def n(self) -> int:
        return self.adjacency.n

    @property
    def nnz(self) -> int:
        return self.adjacency.nnz

    @cached_property
    def in_degrees(self) -> NDArray[np.float64]:
        return self.adjacency.col_sums()

    def imbalance(self) -> NDArray[np.float64]:
        """Row sums L 1 = out-degree - in-degree."""
        return self.out_degrees - self.in_degrees

    @cached_property
    def matrix(self) -> sp.csr_array:
        """L as a CSR matrix."""
        return sp.csr_array(
            sp.diags_array(self.out_degrees) - self.adjacency.csr_transpose
        )

    def matvec(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Compute L x."""
        return self.out_degrees * x - self.adjacency.rmatvec(x)

    def rmatvec(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Compute L^T x."""
        return self.out_degrees * x - self.adjacency.matvec(x)

    def support(self) -> NDArray[np.int64]:
        return self.adjacency.support()

    def scale_columns(self, x: NDArray[np.float64]) -> "DirectedLaplacian":
        """
        Compute L diag(x) for a positive vector x.

        The result is again a directed Laplacian with adjacency diag(x) A.
        """
        adjacency = self.adjacency.scale_rows(x)
        return _from_adjacency(adjacency, self.out_degrees * x, self.tol_eul)

    def __add__(self, other: "DirectedLaplacian") -> "DirectedLaplacian":
        if not isinstance(other, DirectedLaplacian):
            return NotImplemented
        return validate_laplacian(
            self.adjacency + other.adjacency,
            allow_self_loops=True,
        )

    def __repr__(self) -> str:
        return (
            f"DirectedLaplacian(n={self.n}, nnz={self.nnz}, eulerian={self.eulerian})"
        )


class NormalizedWalk:
    """
    Normalized walk matrix W = D^{-1/2} A^T D^{-1/2} with its degrees.

    `walk` is stored in the A^T role: the associated Laplacian is
    D^{1/2} (I - W) D^{1/2}. Diagonal entries (lazy or squared walks) are allowed.
    """

    degrees: NDArray[np.float64]
    walk: SparseGraph

    def __init__(self, degrees: NDArray[np.float64], walk: SparseGraph) -> None:
        self.degrees = degrees
        self.degrees.setflags(write=False)
        self.walk = walk

    @property
    def n(self) -> int:
        return self.walk.n

    @cached_property
    def sqrt_degrees(self) -> NDArray[np.float64]:
        return np.sqrt(self.degrees)

    @cached_property
    def kernel(self) -> NDArray[np.float64]:
        """Unit vector D^{1/2} 1 / ||D^{1/2} 1||, the kernel of I - W."""
        vector = self.sqrt_degrees
        return vector / np.linalg.norm(vector)

    def matvec(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.walk.matvec(x)

    def lazy(self, alpha: float) -> SparseGraph:
        """W^(alpha) = alpha I + (1 - alpha) W."""
        return self.walk.scale(1 - alpha) + SparseGraph.diagonal_matrix(
            np.full(self.n, alpha)
        )

    def unnormalized(self, walk: SparseGraph | None = None) -> SparseGraph:
        """D^{1/2} W D^{1/2}, again in the A^T role."""
        target = self.walk if walk is None else walk
        return target.scale_rows(self.sqrt_degrees).scale_cols(self.sqrt_degrees)

    def to_laplacian(self) -> DirectedLaplacian:
        """Reconstruct D^{1/2} (I - W) D^{1/2} as a directed Laplacian."""
        adjacency = self.unnormalized().transpose().offdiagonal()
        return validate_laplacian(
            adjacency, tol_eul=1e-10 * _average(self.degrees)
        )

    def __repr__(self) -> str:
        return f"NormalizedWalk(n={self.n}, nnz={self.walk.nnz})"


def _average(values: NDArray[np.float64]) -> float:
    return float(values.sum() / max(len(values), 1))


def _from_adjacency(
    adjacency: SparseGraph,
    out_degrees: NDArray[np.float64],
    tol_eul: float | None,
) -> DirectedLaplacian:
    if tol_eul is None:
        tol_eul = TOL_EUL * _average(out_degrees)
    imbalance = out_degrees - adjacency.col_sums()
    worst = int(np.argmax(np.abs(imbalance))) if adjacency.n > 0 else 0
    violation = float(np.abs(imbalance[worst])) if adjacency.n > 0 else 0.0
    eulerian = violation <= tol_eul
    if not eulerian:
        logger.debug(
            "Not Eulerian: worst row %d has |out - in| = %.3e (tolerance %.3e)",
            worst,
            violation,
            tol_eul,
        )
    return DirectedLaplacian(adjacency, out_degrees, eulerian, tol_eul)


def validate_laplacian(
    graph: SparseGraph,
    tol_eul: float | None = None,
    allow_self_loops: bool = False,
) -> DirectedLaplacian:
    """
    Build the directed Laplacian of an adjacency graph.

    Out-degrees are the row sums of A. The Eulerian flag is set when
    ||L 1||_inf <= tol_eul; the worst violated row is logged.

    Parameters
    ----------
    graph : SparseGraph
        Adjacency graph with nonnegative weights.
    tol_eul : float, optional
        Eulerian tolerance. By default 1e-12 * Tr(D) / n.
    allow_self_loops : bool, default False
        Accept diagonal entries. They cancel in D - A^T but count towards D.

    Returns
    -------
    DirectedLaplacian

    Raises
    ------
    ValidationError
        If the graph is not an adjacency graph.
    SelfLoopError
        If the graph has self-loops and they are not allowed.

    """
    if graph.kind != "adjacency":
        raise ValidationError("A Laplacian needs an adjacency graph")
    if not allow_self_loops and graph.has_diagonal():
        vertex = int(graph.rows[graph.rows == graph.cols][0])
        raise SelfLoopError(
            f"Self-loop at vertex {vertex} is not allowed in a Laplacian adjacency",
            vertex=vertex,
        )
    return _from_adjacency(graph, graph.row_sums(), tol_eul)


def laplacian_from_matrix(
    matrix: sp.sparray | sp.spmatrix, tol_eul: float | None = None
) -> DirectedLaplacian:
    """
    Recover a directed Laplacian from its matrix form D - A^T.

    Raises
    ------
    ValidationError
        If an off-diagonal entry is positive or a column does not sum to zero.

    """
    csr = sp.csr_array(matrix)
    coo = csr.tocoo()
    off = coo.row != coo.col
    if np.any(coo.data[off] > 0):
        raise ValidationError("Off-diagonal entries of a Laplacian must be <= 0")
    adjacency = SparseGraph(csr.shape[0], coo.col[off], coo.row[off], -coo.data[off])
    laplacian = validate_laplacian(adjacency, tol_eul=tol_eul)
    diagonal = csr.diagonal()
    scale = max(float(np.abs(diagonal).max(initial=0.0)), 1.0)
    if np.any(np.abs(diagonal - laplacian.out_degrees) > 1e-10 * scale):
        raise ValidationError("Columns of a directed Laplacian must sum to zero")
    return laplacian


def symmetrization(laplacian: DirectedLaplacian) -> SparseGraph:
    """
    Symmetrization U_L = (L + L^T) / 2 as a general sparse matrix.

    For an Eulerian Laplacian the result is an undirected Laplacian.
    """
    adjacency = laplacian.adjacency.offdiagonal()
    off = (adjacency + adjacency.transpose()).scale(-0.5)
    diagonal = laplacian.out_degrees - laplacian.adjacency.diagonal()
    return SparseGraph(
        laplacian.n,
        np.concatenate([off.rows, np.arange(laplacian.n)]),
        np.concatenate([off.cols, np.arange(laplacian.n)]),
        np.concatenate([off.weights, diagonal]),
        kind="general",
    )


def graph_symmetrization(laplacian: DirectedLaplacian) -> DirectedLaplacian:
    """
    Graph symmetrization S_L: every directed edge becomes an undirected edge
    of half its weight. Defined for any directed Laplacian.
    """
    adjacency = laplacian.adjacency.offdiagonal()
    undirected = (adjacency + adjacency.transpose()).scale(0.5)
    return validate_laplacian(undirected)


def normalize(laplacian: DirectedLaplacian) -> NormalizedWalk:
    """
    Factor L = D^{1/2} (I - W) D^{1/2}.

    Raises
    ------
    ZeroDegreeVertexError
        If some vertex has zero out-degree.

    """
    degrees = np.array(laplacian.out_degrees, dtype=np.float64)
    if np.any(degrees <= 0):
        vertex = int(np.argmin(degrees))
        raise ZeroDegreeVertexError(
            f"Vertex {vertex} has zero out-degree", vertex=vertex
        )
    inv_sqrt = 1 / np.sqrt(degrees)
    walk = laplacian.adjacency.transpose().scale_rows(inv_sqrt).scale_cols(inv_sqrt)
    return NormalizedWalk(degrees, walk)


def project_orthogonal(
    v: ArrayLike, kernel: ArrayLike
) -> NDArray[np.float64]:
    """
    Remove the component of `v` along `kernel`.

    Parameters
    ----------
    v : ArrayLike
        Vector to project.
    kernel : ArrayLike
        Nonzero kernel direction.

    Returns
    -------
    numpy.ndarray
        v - (<v, k> / <k, k>) k.

    Raises
    ------
    ZeroKernelVectorError
        If `kernel` is zero.

    """
    v_ = np.asarray(v, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    kk = float(k @ k)
    if kk == 0:
        raise ZeroKernelVectorError("Kernel vector must be nonzero")
    return v_ - (float(v_ @ k) / kk) * k


def is_strongly_connected(laplacian: DirectedLaplacian) -> bool:
    """Whether the graph restricted to vertices with edges is strongly connected."""
    support = laplacian.support()
    if len(support) <= 1:
        return True
    _, labels = connected_components(
        laplacian.adjacency.csgraph, directed=True, connection="strong"
    )
    return len(np.unique(labels[support])) == 1


def require_strongly_connected(laplacian: DirectedLaplacian) -> None:
    """
    Raises
    ------
    NotStronglyConnectedError
        If the graph on its support is not strongly connected.

    """
    if not is_strongly_connected(laplacian):
        raise NotStronglyConnectedError(
            "Graph associated with the Laplacian is not strongly connected"
        )


def require_full_support(laplacian: DirectedLaplacian) -> None:
    """Strongly connected on all n vertices."""
    require_strongly_connected(laplacian)
    if len(laplacian.support()) != laplacian.n and laplacian.n > 1:
        raise NotStronglyConnectedError(
            "Graph has isolated vertices",
            isolated=int(laplacian.n - len(laplacian.support())),
        )
