import logging

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from numpy.typing import ArrayLike, NDArray

from dirlap.config import (
    DECOMPOSITION_DEFAULT,
    SAMPLING_DEFAULT,
    DecompositionConfig,
    SamplingConfig,
)
from dirlap.core import DirectedLaplacian, SparseGraph, validate_laplacian
from dirlap.events import EventBus, ProductSparsifiedEvent, publish
from dirlap.exceptions import NormMismatchError, RowColMismatchError
from dirlap.sampling import ResamplePolicy, SampleOutcome, default_policy, rebalance
from dirlap.utils import child_seed, make_rng, thread_limit

from .eulerian import sparsify_eulerian

logger = logging.getLogger(__name__)

# Products touching at most this many rows plus columns are kept exactly
EXACT_SUPPORT = 64
NORM_RTOL = 1e-10


@dataclass(frozen=True)
class ProductEntries:
    """Off-diagonal adjacency entries of one (possibly sparsified) product."""

    rows: NDArray[np.int64]
    cols: NDArray[np.int64]
    weights: NDArray[np.float64]
    support: int
    exact: bool


def _exact_entries(
    u_index: NDArray[np.int64],
    u_value: NDArray[np.float64],
    v_index: NDArray[np.int64],
    v_value: NDArray[np.float64],
    r: float,
) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.float64]]:
    rows = np.repeat(u_index, len(v_index))
    cols = np.tile(v_index, len(u_index))
    weights = np.outer(u_value, v_value).ravel() / r
    off = rows != cols
    return rows[off], cols[off], weights[off]


def _draw_partners(
    anchor: NDArray[np.int64],
    mass: NDArray[np.float64],
    r: float,
    uniform: NDArray[np.float64],
) -> NDArray[np.int64]:
    """
    For every anchor a, draw a partner b != a with probability mass_b / (r - mass_a).

    Works on local labels 0..m-1; prefix sums replace an alias table.
    """
    prefix = np.cumsum(mass)
    before = prefix[anchor] - mass[anchor]
    target = uniform * (r - mass[anchor])
    target = np.where(target >= before, target + mass[anchor], target)
    partner = np.searchsorted(prefix, target, side="right")
    np.minimum(partner, len(mass) - 1, out=partner)
    # rounding can land on the anchor or on a zero-mass slot; step to the nearest
    # valid partner on the same side of the anchor
    invalid = (partner == anchor) | (mass[partner] <= 0)
    if np.any(invalid):
        positive = np.flatnonzero(mass > 0)
        for index in np.flatnonzero(invalid):
            choices = positive[positive != anchor[index]]
            position = min(
                np.searchsorted(choices, partner[index]), len(choices) - 1
            )
            partner[index] = choices[position]
    return partner


def _sample_entries(
    u: NDArray[np.float64],
    v: NDArray[np.float64],
    r: float,
    draws: int,
    rng: np.random.Generator,
) -> SparseGraph:
    """Average of `draws` samples of A_jk = u_j v_k / r (j != k), local labels."""
    m = len(u)
    u_support = np.flatnonzero(u > 0)
    v_support = np.flatnonzero(v > 0)
    s = len(u_support) + len(v_support)
    anchors = rng.integers(0, s, size=draws)
    uniform = rng.random(draws)
    from_row = anchors < len(u_support)
    rows = np.empty(draws, dtype=np.int64)
    cols = np.empty(draws, dtype=np.int64)
    # row anchor j: column k != j with probability v_k / (r - v_j)
    rows[from_row] = u_support[anchors[from_row]]
    cols[from_row] = _draw_partners(rows[from_row], v, r, uniform[from_row])
    # column anchor k: row j != k with probability u_j / (r - u_k)
    cols[~from_row] = v_support[anchors[~from_row] - len(u_support)]
    rows[~from_row] = _draw_partners(cols[~from_row], u, r, uniform[~from_row])

    pair, counts = np.unique(rows * m + cols, return_counts=True)
    j, k = np.divmod(pair, m)
    value = u[j] * v[k] / r
    probability = (v[k] / (r - v[j]) + u[j] / (r - u[k])) / s
    return SparseGraph(m, j, k, value / probability * (counts / draws))


def _product(
    u_index: NDArray[np.int64],
    u_value: NDArray[np.float64],
    v_index: NDArray[np.int64],
    v_value: NDArray[np.float64],
    p: float,
    eps: float,
    seed: int,
    config: SamplingConfig,
    policy: ResamplePolicy | None,
) -> ProductEntries:
    """
    Entries of the product Laplacian diag(u) - (1/r) v u^T, sparsified.

    Its adjacency is A_jk = u_j v_k / r for j != k, with row sums
    u_j (r - v_j) / r and column sums v_k (r - u_k) / r.
    """
    r = float(u_value.sum())
    support = len(u_index) + len(v_index)
    draws = config.sample_count(max(support, 2), eps, p)
    if (
        len(u_index) <= 1
        or len(v_index) <= 1
        or support <= EXACT_SUPPORT
        or draws >= len(u_index) * len(v_index)
    ):
        rows, cols, weights = _exact_entries(u_index, u_value, v_index, v_value, r)
        return ProductEntries(rows, cols, weights, support, exact=True)

    vertices = np.union1d(u_index, v_index)
    u = np.zeros(len(vertices))
    v = np.zeros(len(vertices))
    u[np.searchsorted(vertices, u_index)] = u_value
    v[np.searchsorted(vertices, v_index)] = v_value
    target_row = u * (r - v) / r
    target_col = v * (r - u) / r

    def draw(attempt: int) -> SampleOutcome:
        sample = _sample_entries(
            u, v, r, draws, make_rng(child_seed(seed, attempt))
        )
        return SampleOutcome(
            graph=rebalance(sample, target_row, target_col, eps, forbid_diagonal=True),
            eps=eps,
        )

    context = (policy or default_policy(config.max_resamples)).create_context()
    local = context.draw_with_resamples(draw).graph
    return ProductEntries(
        vertices[local.rows],
        vertices[local.cols],
        np.array(local.weights),
        support,
        exact=False,
    )


def _sparse_vector(values: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    vector = np.asarray(values, dtype=np.float64).ravel()
    if np.any(vector < 0) or not np.all(np.isfinite(vector)):
        raise ValueError("Product factors must be finite and nonnegative")
    index = np.flatnonzero(vector)
    return index, vector[index]


def sparsify_product(
    x: ArrayLike,
    y: ArrayLike,
    p: float,
    eps: float,
    seed: int,
    *,
    config: SamplingConfig = SAMPLING_DEFAULT,
    policy: ResamplePolicy | None = None,
) -> DirectedLaplacian:
    """
    Sparsify the product Laplacian L = diag(y) - (1/r) x y^T without forming it.

    The product is returned exactly when x or y has at most one nonzero, when
    it touches at most 64 rows plus columns, or when sampling would not reduce
    it. Otherwise entries are drawn with a two-stage scheme: an anchor row or
    column uniformly among the s nonzero rows and columns, then a partner
    proportional to the other factor. The sample is patched to the exact
    degrees of the product.

    Parameters
    ----------
    x : ArrayLike
        Nonnegative vector.
    y : ArrayLike
        Nonnegative vector with ||y||_1 = ||x||_1 = r > 0.
    p : float
        Failure probability.
    eps : float
        Target accuracy.
    seed : int
        Seed of the draws.
    config : SamplingConfig, optional
    policy : ResamplePolicy, optional
        Resample policy for unbalanced patches.

    Returns
    -------
    DirectedLaplacian
        Laplacian with the in- and out-degrees of the product. Self-loops of
        the product cancel in D - A^T and are dropped.

    Raises
    ------
    NormMismatchError
        If ||x||_1 and ||y||_1 differ by more than 1e-10 relative or are zero.

    """
    x_index, x_value = _sparse_vector(x)
    y_index, y_value = _sparse_vector(y)
    n = len(np.asarray(x).ravel())
    if len(np.asarray(y).ravel()) != n:
        raise ValueError("Product factors must have the same length")
    r = float(x_value.sum())
    r_y = float(y_value.sum())
    if r <= 0 or abs(r - r_y) > NORM_RTOL * max(r, r_y):
        raise NormMismatchError(
            f"Product factors need equal positive mass, got {r!r} and {r_y!r}",
            x_mass=r,
            y_mass=r_y,
        )
    entries = _product(y_index, y_value, x_index, x_value, p, eps, seed, config, policy)
    return validate_laplacian(
        SparseGraph(n, entries.rows, entries.cols, entries.weights)
    )


def _check_walk(walk: SparseGraph) -> NDArray[np.float64]:
    degrees = walk.row_sums()
    col_sums = walk.col_sums()
    scale = max(float(np.abs(degrees).max(initial=0.0)), 1.0)
    mismatch = float(np.abs(degrees - col_sums).max(initial=0.0))
    if mismatch > NORM_RTOL * scale:
        raise RowColMismatchError(
            f"Row and column sums of the walk differ by {mismatch:.3e}",
            mismatch=mismatch,
        )
    return degrees


def sparsify_square(
    walk: SparseGraph,
    p: float,
    eps: float,
    seed: int,
    *,
    sampling: SamplingConfig = SAMPLING_DEFAULT,
    decomposition: DecompositionConfig = DECOMPOSITION_DEFAULT,
    max_workers: int | None = None,
    event_bus: EventBus | None = None,
) -> SparseGraph:
    """
    Sparsify the square W D^{-1} W of a balanced nonnegative matrix.

    With D = diag(W 1), the Eulerian Laplacian M = D - W D^{-1} W is the sum over
    vertices i of the product Laplacians diag(W[i, :]) - (1/D_ii) W[:, i] W[i, :]^T.
    Every product is sparsified with (p / 2n, eps / 6), the results are summed
    and sparsified again as an Eulerian Laplacian with (p / 2, eps / 3). The
    square itself is never formed.

    Parameters
    ----------
    walk : SparseGraph
        Nonnegative W with W 1 = W^T 1, diagonal allowed.
    p : float
        Failure probability.
    eps : float
        Target accuracy.
    seed : int
        Seed; every vertex and the final stage derive child seeds.
    sampling : SamplingConfig, optional
    decomposition : DecompositionConfig, optional
    max_workers : int, optional
        Threads for the per-vertex products. None reads DIRLAP_THREADS.
    event_bus : EventBus, optional
        Receives a ProductSparsifiedEvent per vertex plus downstream events.

    Returns
    -------
    SparseGraph
        W~ such that D - W~ approximates M; W~ 1 = W~^T 1 = D 1.

    Raises
    ------
    RowColMismatchError
        If row and column sums of W differ by more than 1e-10 relative.

    """
    degrees = _check_walk(walk)
    n = walk.n
    by_row = walk.csr
    by_col = walk.csr_transpose
    vertex_p = p / (2 * n)
    vertex_eps = eps / 6

    def run(vertex: int) -> ProductEntries | None:
        if degrees[vertex] <= 0:
            return None
        row = slice(by_row.indptr[vertex], by_row.indptr[vertex + 1])
        col = slice(by_col.indptr[vertex], by_col.indptr[vertex + 1])
        # u = W[i, :], v = W[:, i]
        entries = _product(
            by_row.indices[row].astype(np.int64),
            by_row.data[row],
            by_col.indices[col].astype(np.int64),
            by_col.data[col],
            vertex_p,
            vertex_eps,
            child_seed(seed, 0, vertex),
            sampling,
            None,
        )
        publish(
            event_bus,
            ProductSparsifiedEvent(
                type="product_sparsified",
                vertex=vertex,
                support=entries.support,
                exact=entries.exact,
                nnz=len(entries.weights),
            ),
        )
        return entries

    with ThreadPoolExecutor(max_workers=max_workers or thread_limit()) as executor:
        products = [entries for entries in executor.map(run, range(n)) if entries]
    logger.debug(
        "Square of %r: %d products, %d sampled",
        walk,
        len(products),
        sum(not entries.exact for entries in products),
    )
    if products:
        summed = SparseGraph(
            n,
            np.concatenate([entries.rows for entries in products]),
            np.concatenate([entries.cols for entries in products]),
            np.concatenate([entries.weights for entries in products]),
        )
    else:
        summed = SparseGraph.empty(n)
    square = validate_laplacian(summed, tol_eul=1e-10 * float(degrees.mean()))
    sparsified = sparsify_eulerian(
        square,
        p / 2,
        eps / 3,
        child_seed(seed, 1),
        sampling=sampling,
        decomposition=decomposition,
        event_bus=event_bus,
    )
    loops = np.maximum(degrees - sparsified.out_degrees, 0.0)
    return sparsified.adjacency.transpose() + SparseGraph.diagonal_matrix(loops)
