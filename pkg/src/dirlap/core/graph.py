from functools import cached_property
from typing import Any, Iterable, Literal, TypeAlias

import numpy as np
import scipy.sparse as sp

from numpy.typing import ArrayLike, NDArray

from dirlap.exceptions import NegativeWeightError, NonFiniteError

GraphKind: TypeAlias = Literal["adjacency", "general"]


def _readonly(array: NDArray[Any]) -> NDArray[Any]:
    array.setflags(write=False)
    return array


class SparseGraph:
    """
    Weighted directed graph, or general sparse matrix, in canonical coordinate form.

    Entries are stored row-major with ties broken by column, duplicates summed
    and explicit zeros dropped, so two graphs with the same entries serialize
    identically. Instances are immutable.

    Parameters
    ----------
    n : int
        Number of vertices (the matrix is n x n).
    rows : ArrayLike
        Row (source) index of each entry.
    cols : ArrayLike
        Column (target) index of each entry.
    weights : ArrayLike
        Entry values. Adjacency graphs require nonnegative values.
    kind : {"adjacency", "general"}, default "adjacency"
        Interpretation of the entries.

    Raises
    ------
    NonFiniteError
        If any weight is NaN or infinite.
    NegativeWeightError
        If an adjacency graph has a negative weight.
    ValueError
        If indices are out of range or arrays have different lengths.

    """

    n: int
    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    weights: NDArray[np.float64]
    kind: GraphKind

    def __init__(
        self,
        n: int,
        rows: ArrayLike,
        cols: ArrayLike,
        weights: ArrayLike,
        kind: GraphKind = "adjacency",
    ) -> None:
        rows_ = np.asarray(rows, dtype=np.int64).ravel()
        cols_ = np.asarray(cols, dtype=np.int64).ravel()
        weights_ = np.asarray(weights, dtype=np.float64).ravel()
        if not (len(rows_) == len(cols_) == len(weights_)):
            raise ValueError("rows, cols and weights must have the same length")
        if n < 0:
            raise ValueError(f"Vertex count must be nonnegative, got {n}")
        if len(rows_) > 0 and (
            rows_.min() < 0 or cols_.min() < 0 or rows_.max() >= n or cols_.max() >= n
        ):
            raise ValueError(f"Entry index out of range for n = {n}")
        if not np.all(np.isfinite(weights_)):
            raise NonFiniteError("Graph weights must be finite")
        if kind == "adjacency" and np.any(weights_ < 0):
            bad = int(np.argmin(weights_))
            raise NegativeWeightError(
                f"Negative weight {weights_[bad]!r} on edge "
                f"({rows_[bad]}, {cols_[bad]})",
                row=int(rows_[bad]),
                col=int(cols_[bad]),
            )
        matrix = sp.csr_array((weights_, (rows_, cols_)), shape=(n, n))
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        coo = matrix.tocoo()
        self.n = int(n)
        self.rows = _readonly(coo.row.astype(np.int64))
        self.cols = _readonly(coo.col.astype(np.int64))
        self.weights = _readonly(coo.data.astype(np.float64))
        self.kind = kind

    @classmethod
    def from_scipy(
        cls, matrix: sp.sparray | sp.spmatrix, kind: GraphKind = "adjacency"
    ) -> "SparseGraph":
        """Build from any square scipy sparse matrix."""
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Matrix must be square, got shape {matrix.shape}")
        coo = sp.coo_array(matrix)
        return cls(matrix.shape[0], coo.row, coo.col, coo.data, kind=kind)

    @classmethod
    def from_dense(
        cls, matrix: ArrayLike, kind: GraphKind = "adjacency"
    ) -> "SparseGraph":
        """Build from a dense square array (small inputs and tests)."""
        return cls.from_scipy(sp.coo_array(np.asarray(matrix, dtype=np.float64)), kind)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[tuple[int, int, float]],
        kind: GraphKind = "adjacency",
    ) -> "SparseGraph":
        """Build from (source, target, weight) triples."""
        triples = list(edges)
        if not triples:
            return cls.empty(n, kind)
        rows, cols, weights = zip(*triples, strict=True)
        return cls(n, rows, cols, weights, kind=kind)

    @classmethod
    def empty(cls, n: int, kind: GraphKind = "adjacency") -> "SparseGraph":
        return cls(n, [], [], [], kind=kind)

    @classmethod
    def diagonal_matrix(
        cls, values: ArrayLike, kind: GraphKind = "adjacency"
    ) -> "SparseGraph":
        values_ = np.asarray(values, dtype=np.float64)
        index = np.arange(len(values_))
        return cls(len(values_), index, index, values_, kind=kind)

    @property
    def nnz(self) -> int:
        return len(self.weights)

    @cached_property
    def csr(self) -> sp.csr_array:
        """Read-only CSR view used for products."""
        matrix = sp.csr_array(
            (self.weights, (self.rows, self.cols)), shape=(self.n, self.n)
        )
        matrix.sort_indices()
        return matrix

    @cached_property
    def csgraph(self) -> sp.csr_array:
        """CSR copy with 32-bit indices, as `scipy.sparse.csgraph` routines expect."""
        matrix = self.csr.copy()
        matrix.indices = matrix.indices.astype(np.int32)
        matrix.indptr = matrix.indptr.astype(np.int32)
        return matrix

    @cached_property
    def csr_transpose(self) -> sp.csr_array:
        return sp.csr_array(self.csr.T)

    def matvec(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Compute G x."""
        return self.csr @ x

    def rmatvec(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        """Compute G^T x."""
        return self.csr_transpose @ x

    def row_sums(self) -> NDArray[np.float64]:
        return np.bincount(self.rows, weights=self.weights, minlength=self.n)

    def col_sums(self) -> NDArray[np.float64]:
        return np.bincount(self.cols, weights=self.weights, minlength=self.n)

    def diagonal(self) -> NDArray[np.float64]:
        mask = self.rows == self.cols
        return np.bincount(
            self.rows[mask], weights=self.weights[mask], minlength=self.n
        )

    def has_diagonal(self) -> bool:
        return bool(np.any(self.rows == self.cols))

    def offdiagonal(self) -> "SparseGraph":
        mask = self.rows != self.cols
        return self._with_entries(self.rows[mask], self.cols[mask], self.weights[mask])

    def transpose(self) -> "SparseGraph":
        return SparseGraph(self.n, self.cols, self.rows, self.weights, kind=self.kind)

    def scale(self, factor: float) -> "SparseGraph":
        return self._with_entries(self.rows, self.cols, self.weights * factor)

    def scale_rows(self, factors: NDArray[np.float64]) -> "SparseGraph":
        """Compute diag(factors) G."""
        return self._with_entries(
            self.rows, self.cols, self.weights * factors[self.rows]
        )

    def scale_cols(self, factors: NDArray[np.float64]) -> "SparseGraph":
        """Compute G diag(factors)."""
        return self._with_entries(
            self.rows, self.cols, self.weights * factors[self.cols]
        )

    def restrict(self, mask: NDArray[np.bool_]) -> "SparseGraph":
        """Keep only entries selected by a boolean mask over the entries."""
        return self._with_entries(self.rows[mask], self.cols[mask], self.weights[mask])

    def support(self) -> NDArray[np.int64]:
        """Vertices with a nonzero row or column."""
        return np.union1d(self.rows, self.cols)

    def weight_ratio(self) -> float:
        """Ratio w_max / w_min of the entry magnitudes (1 for an empty graph)."""
        if self.nnz == 0:
            return 1.0
        magnitudes = np.abs(self.weights)
        return float(magnitudes.max() / magnitudes.min())

    def __add__(self, other: "SparseGraph") -> "SparseGraph":
        if not isinstance(other, SparseGraph):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"Cannot add graphs with n = {self.n} and n = {other.n}")
        kind: GraphKind = (
            "adjacency"
            if self.kind == other.kind == "adjacency"
            else "general"
        )
        return SparseGraph(
            self.n,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.weights, other.weights]),
            kind=kind,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.kind == other.kind
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash(
            (
                self.n,
                self.kind,
                self.rows.tobytes(),
                self.cols.tobytes(),
                self.weights.tobytes(),
            )
        )

    def __repr__(self) -> str:
        return f"SparseGraph(n={self.n}, nnz={self.nnz}, kind={self.kind!r})"

    def _with_entries(
        self,
        rows: NDArray[np.int64],
        cols: NDArray[np.int64],
        weights: NDArray[np.float64],
    ) -> "SparseGraph":
        return SparseGraph(self.n, rows, cols, weights, kind=self.kind)


def sum_graphs(graphs: Iterable[SparseGraph], n: int) -> SparseGraph:
    """Sum many graphs on the same vertex set in one canonicalization pass."""
    parts = list(graphs)
    if not parts:
        return SparseGraph.empty(n)
    kind: GraphKind = (
        "adjacency" if all(g.kind == "adjacency" for g in parts) else "general"
    )
    return SparseGraph(
        n,
        np.concatenate([g.rows for g in parts]),
        np.concatenate([g.cols for g in parts]),
        np.concatenate([g.weights for g in parts]),
        kind=kind,
    )
