import logging
import math

from dataclasses import dataclass, replace

import numpy as np

from numpy.typing import NDArray

from dirlap.config import SAMPLING_DEFAULT
from dirlap.core import SparseGraph
from dirlap.exceptions import EmptyMatrixError, ValidationError
from dirlap.utils import child_seed, make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EntryDistribution:
    """
    Sampling distribution over the nonzero entries of a nonnegative matrix.

    Entry (i, j) is drawn with probability (A_ij / s) (1 / r_i + 1 / c_j),
    where r and c are row and column sums and s counts the nonzero rows
    plus the nonzero columns. Draws use a cumulative table and binary search.

    Attributes
    ----------
    graph : SparseGraph
        Sampled matrix A.
    row_sums : numpy.ndarray
        r, zero on empty rows.
    col_sums : numpy.ndarray
        c, zero on empty columns.
    support : int
        s.
    probabilities : numpy.ndarray
        p_ij aligned with the canonical entries of `graph`.
    cumulative : numpy.ndarray
        Running sum of `probabilities`.
    seed : int
        Seed of the draws.

    """

    graph: SparseGraph
    row_sums: NDArray[np.float64]
    col_sums: NDArray[np.float64]
    support: int
    probabilities: NDArray[np.float64]
    cumulative: NDArray[np.float64]
    seed: int

    def with_seed(self, seed: int) -> "EntryDistribution":
        return replace(self, seed=seed)


def build_distribution(graph: SparseGraph, seed: int) -> EntryDistribution:
    """
    Build the entrywise sampling distribution of a nonnegative matrix.

    Parameters
    ----------
    graph : SparseGraph
        Nonnegative matrix. Empty rows and columns are ignored.
    seed : int
        Seed used by `sample_average`.

    Returns
    -------
    EntryDistribution

    Raises
    ------
    EmptyMatrixError
        If the matrix has no nonzero entry.
    ValidationError
        If the matrix has a negative entry.

    """
    if graph.nnz == 0:
        raise EmptyMatrixError("Cannot sample from a matrix without nonzero entries")
    if np.any(graph.weights < 0):
        raise ValidationError("Entrywise sampling needs a nonnegative matrix")
    row_sums = graph.row_sums()
    col_sums = graph.col_sums()
    support = int(np.count_nonzero(row_sums) + np.count_nonzero(col_sums))
    weights = graph.weights
    probabilities = (
        weights * (1 / row_sums[graph.rows] + 1 / col_sums[graph.cols]) / support
    )
    cumulative = np.cumsum(probabilities)
    logger.debug(
        "Entry distribution over %d entries, s = %d, total mass %.17g",
        graph.nnz,
        support,
        cumulative[-1],
    )
    return EntryDistribution(
        graph=graph,
        row_sums=row_sums,
        col_sums=col_sums,
        support=support,
        probabilities=probabilities,
        cumulative=cumulative,
        seed=seed,
    )


def draw_counts(
    cumulative: NDArray[np.float64],
    k: int,
    seed: int,
    chunk_size: int = SAMPLING_DEFAULT.chunk_size,
) -> NDArray[np.int64]:
    """
    Number of times each index is drawn in k draws from a cumulative table.

    Draws are split in chunks with their own child seed, so the result does
    not depend on how chunks are scheduled.
    """
    counts = np.zeros(len(cumulative), dtype=np.int64)
    total = cumulative[-1]
    for chunk in range(math.ceil(k / chunk_size)):
        size = min(chunk_size, k - chunk * chunk_size)
        rng = make_rng(child_seed(seed, chunk))
        index = np.searchsorted(cumulative, rng.random(size) * total, side="right")
        np.minimum(index, len(cumulative) - 1, out=index)
        counts += np.bincount(index, minlength=len(cumulative))
    return counts


def sample_average(
    distribution: EntryDistribution,
    k: int,
    chunk_size: int = SAMPLING_DEFAULT.chunk_size,
) -> SparseGraph:
    """
    Average of k independent single-entry samples (A_ij / p_ij) e_i e_j^T.

    The result is unbiased and has at most k nonzero entries.

    Parameters
    ----------
    distribution : EntryDistribution
        Distribution of the matrix to sample.
    k : int
        Number of draws, at least 1.
    chunk_size : int, optional
        Draws per independently seeded chunk.

    Returns
    -------
    SparseGraph
        Sampled matrix, same kind as the input.

    """
    if k < 1:
        raise ValueError(f"Number of draws must be positive, got {k}")
    counts = draw_counts(distribution.cumulative, k, distribution.seed, chunk_size)
    drawn = counts > 0
    graph = distribution.graph
    values = (graph.weights[drawn] / distribution.probabilities[drawn]) * (
        counts[drawn] / k
    )
    return SparseGraph(
        graph.n, graph.rows[drawn], graph.cols[drawn], values, kind=graph.kind
    )


def sample_independent(distribution: EntryDistribution, k: float) -> SparseGraph:
    """
    Keep every entry independently with probability q_ij = min(1, k p_ij).

    Kept entries are reweighted to A_ij / q_ij, so the result is unbiased and
    has at most k nonzero entries in expectation. Entries with q_ij = 1 are
    always kept at their original weight.

    Parameters
    ----------
    distribution : EntryDistribution
        Distribution of the matrix to sample.
    k : float
        Expected number of draws, positive.

    Returns
    -------
    SparseGraph
        Sampled matrix, same kind as the input.

    """
    if k <= 0:
        raise ValueError(f"Number of draws must be positive, got {k}")
    keep = np.minimum(1.0, k * distribution.probabilities)
    drawn = make_rng(distribution.seed).random(len(keep)) < keep
    graph = distribution.graph
    return SparseGraph(
        graph.n,
        graph.rows[drawn],
        graph.cols[drawn],
        graph.weights[drawn] / keep[drawn],
        kind=graph.kind,
    )
