"""
Decompositions of directed Laplacians into pieces with expander covers.

Edges are bucketed by weight; inside a bucket the unweighted symmetrized graph
is split recursively with spectral sweep cuts until every part certifies a
conductance of at least `phi_target`. Edges cut along the way are decomposed
again in the next round.
"""

import logging
import math

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from numpy.typing import ArrayLike, NDArray
from scipy.sparse.csgraph import connected_components

from dirlap.config import DECOMPOSITION_DEFAULT, DecompositionConfig
from dirlap.core import DirectedLaplacian, SparseGraph, sum_graphs, validate_laplacian
from dirlap.events import EventBus, PieceCertifiedEvent, publish
from dirlap.exceptions import (
    EmptySetError,
    FullSetError,
    NonterminatingDecompositionError,
)
from dirlap.utils import child_seed, content_hash, make_rng, thread_limit

logger = logging.getLogger(__name__)

# Spectral gap certified by Cheeger's inequality is phi^2 / CHEEGER_DENOMINATOR
CHEEGER_DENOMINATOR = 4.0
# An edge of bucket b has w_min * 2^b <= w < w_min * 2^(b+1). Covers weigh it at
# w_min * 2^(b+1), which lies in (w, 2w], hence at most twice the symmetrization
COVER_MULTIPLICITY = 2.0


@dataclass(frozen=True)
class SweepCut:
    """Best prefix cut found by `cheeger_sweep`."""

    vertices: NDArray[np.int64]
    phi: float


@dataclass(frozen=True)
class PieceInfo:
    """Manifest entry of a certified piece."""

    bucket: int
    round: int
    support: int
    nnz: int
    phi: float


@dataclass(frozen=True)
class Decomposition:
    """
    Split of a directed Laplacian into pieces with undirected covers.

    Attributes
    ----------
    pieces : list[DirectedLaplacian]
        Pieces L^(i); their adjacencies sum to the input adjacency.
    covers : list[DirectedLaplacian]
        Undirected (symmetric) Laplacians U^(i), one per piece.
    alpha : float
        Lower bound on the normalized spectral gap of every cover.
    beta : float
        The sum of the covers is dominated by beta times the graph symmetrization.
    total_support : int
        Sum over pieces of the number of vertices they touch.
    phi_target : float
        Conductance every piece was certified against.
    info : list[PieceInfo]
        Per-piece manifest entries.
    rounds : int
        Largest number of rounds used by a bucket.
    buckets : int
        Number of weight buckets.

    """

    pieces: list[DirectedLaplacian]
    covers: list[DirectedLaplacian]
    alpha: float
    beta: float
    total_support: int
    phi_target: float
    info: list[PieceInfo] = field(default_factory=list)
    rounds: int = 0
    buckets: int = 0

    def reassemble(self, n: int) -> SparseGraph:
        """Sum of the piece adjacencies."""
        return sum_graphs((piece.adjacency for piece in self.pieces), n)


def conductance(graph: SparseGraph, vertices: ArrayLike) -> float:
    """
    Conductance of a vertex set in an undirected graph.

    Cut weight divided by the smaller of vol(S) and vol(V \\ S).
    A set with no crossing edge has conductance 0.

    Parameters
    ----------
    graph : SparseGraph
        Symmetric adjacency.
    vertices : ArrayLike
        Vertex set S.

    Returns
    -------
    float

    Raises
    ------
    EmptySetError
        If S is empty.
    FullSetError
        If S contains every vertex.

    """
    inside = np.zeros(graph.n, dtype=bool)
    inside[np.asarray(vertices, dtype=np.int64)] = True
    size = int(inside.sum())
    if size == 0:
        raise EmptySetError("Conductance of an empty set is undefined")
    if size == graph.n:
        raise FullSetError("Conductance of the full vertex set is undefined")
    crossing = inside[graph.rows] & ~inside[graph.cols]
    cut = float(graph.weights[crossing].sum())
    if cut == 0:
        return 0.0
    degrees = graph.row_sums()
    volume = float(degrees[inside].sum())
    return cut / min(volume, float(degrees.sum()) - volume)


def _fiedler_direction(
    graph: SparseGraph,
    degrees: NDArray[np.float64],
    rng: np.random.Generator,
    iterations: int,
    tolerance: float,
) -> NDArray[np.float64]:
    """Power iteration on (I + N) / 2 deflated by D^{1/2} 1, N = D^{-1/2} A D^{-1/2}."""
    inv_sqrt = 1 / np.sqrt(degrees)
    normalized = graph.scale_rows(inv_sqrt).scale_cols(inv_sqrt).csr
    top = np.sqrt(degrees)
    top /= np.linalg.norm(top)
    vector = rng.standard_normal(graph.n)
    vector -= (vector @ top) * top
    vector /= np.linalg.norm(vector)
    previous = np.inf
    for _ in range(iterations):
        image = 0.5 * (vector + normalized @ vector)
        image -= (image @ top) * top
        quotient = float(vector @ image)
        norm = np.linalg.norm(image)
        if norm == 0:
            break
        vector = image / norm
        if abs(quotient - previous) < tolerance:
            break
        previous = quotient
    return vector * inv_sqrt


def _best_prefix(
    graph: SparseGraph, degrees: NDArray[np.float64], order: NDArray[np.int64]
) -> tuple[int, float]:
    """Smallest conductance over the prefixes of `order`, as (prefix size, phi)."""
    n = graph.n
    position = np.empty(n, dtype=np.int64)
    position[order] = np.arange(n)
    upper = graph.rows < graph.cols
    first = np.minimum(position[graph.rows[upper]], position[graph.cols[upper]])
    last = np.maximum(position[graph.rows[upper]], position[graph.cols[upper]])
    # an edge crosses prefix k (the first k vertices) iff first < k <= last
    difference = np.zeros(n + 1)
    np.add.at(difference, first + 1, graph.weights[upper])
    np.add.at(difference, last + 1, -graph.weights[upper])
    cut = np.cumsum(difference)[1:n]
    volume = np.cumsum(degrees[order])[: n - 1]
    total = float(degrees.sum())
    phi = cut / np.minimum(volume, total - volume)
    best = int(np.argmin(phi))
    return best + 1, float(phi[best])


def cheeger_sweep(
    graph: SparseGraph,
    trials: int = DECOMPOSITION_DEFAULT.trials,
    seed: int = 0,
    *,
    config: DecompositionConfig = DECOMPOSITION_DEFAULT,
) -> SweepCut:
    """
    Low-conductance cut of an undirected graph by spectral sweeps.

    Each trial approximates the second eigenvector of the normalized adjacency
    by power iteration, orders the vertices by their D^{-1/2}-scaled
    coordinate and evaluates every prefix cut. The best cut over all trials
    is returned. A disconnected graph yields one of its components with
    conductance 0.

    Parameters
    ----------
    graph : SparseGraph
        Symmetric nonnegative adjacency. Vertices without edges are ignored.
    trials : int, optional
        Power-iteration restarts.
    seed : int, optional
        Seed of the starting vectors.
    config : DecompositionConfig, optional
        Iteration count and stagnation tolerance.

    Returns
    -------
    SweepCut
        Cut in the vertex labels of `graph`.

    """
    support = graph.support()
    if len(support) < 2:
        return SweepCut(vertices=support, phi=math.inf)
    local = _restrict_vertices(graph, support)
    components, labels = connected_components(local.csgraph, directed=False)
    if components > 1:
        return SweepCut(vertices=support[labels == labels[0]], phi=0.0)
    degrees = local.row_sums()
    best = SweepCut(vertices=support[:1], phi=math.inf)
    for trial in range(trials):
        rng = make_rng(child_seed(seed, trial))
        direction = _fiedler_direction(
            local, degrees, rng, config.iterations, config.tolerance
        )
        order = np.argsort(direction, kind="stable")
        size, phi = _best_prefix(local, degrees, order)
        if phi < best.phi:
            best = SweepCut(vertices=np.sort(support[order[:size]]), phi=phi)
    return best


def _restrict_vertices(graph: SparseGraph, vertices: NDArray[np.int64]) -> SparseGraph:
    """Induced subgraph relabelled to 0..len(vertices)-1."""
    label = np.full(graph.n, -1, dtype=np.int64)
    label[vertices] = np.arange(len(vertices))
    keep = (label[graph.rows] >= 0) & (label[graph.cols] >= 0)
    return SparseGraph(
        len(vertices),
        label[graph.rows[keep]],
        label[graph.cols[keep]],
        graph.weights[keep],
        kind=graph.kind,
    )


def _pattern(edges: SparseGraph) -> SparseGraph:
    """Undirected multiplicity graph: one unit per directed edge, both ways."""
    ones = np.ones(edges.nnz)
    return SparseGraph(
        edges.n,
        np.concatenate([edges.rows, edges.cols]),
        np.concatenate([edges.cols, edges.rows]),
        np.concatenate([ones, ones]),
    )


def _certify(
    pattern: SparseGraph,
    phi_target: float,
    seed: int,
    config: DecompositionConfig,
) -> list[tuple[NDArray[np.int64], float]]:
    """Split the pattern recursively into vertex sets certifying phi_target."""
    support = pattern.support()
    _, labels = connected_components(
        _restrict_vertices(pattern, support).csgraph, directed=False
    )
    queue = [support[labels == label] for label in np.unique(labels)]
    certified = []
    while queue:
        vertices = queue.pop()
        if len(vertices) < 2:
            continue
        local = _restrict_vertices(pattern, vertices)
        if local.nnz == 0:
            continue
        cut = cheeger_sweep(
            local,
            config.trials,
            child_seed(seed, content_hash(vertices)),
            config=config,
        )
        if cut.phi >= phi_target:
            certified.append((vertices, cut.phi))
            continue
        side = np.zeros(len(vertices), dtype=bool)
        side[cut.vertices] = True
        queue.append(vertices[side])
        queue.append(vertices[~side])
    certified.sort(key=lambda item: int(item[0][0]))
    return certified


def _decompose_bucket(
    edges: SparseGraph,
    bucket: int,
    cover_weight: float,
    phi_target: float,
    seed: int,
    config: DecompositionConfig,
    event_bus: EventBus | None,
) -> tuple[list[tuple[SparseGraph, SparseGraph, PieceInfo]], int]:
    limit = math.ceil(math.log2(max(edges.nnz, 2))) + 1
    remaining = edges
    results = []
    rounds = 0
    for round_ in range(limit):
        if remaining.nnz == 0:
            break
        rounds = round_ + 1
        owner = np.full(edges.n, -1, dtype=np.int64)
        sets = _certify(
            _pattern(remaining), phi_target, child_seed(seed, round_), config
        )
        for index, (vertices, _) in enumerate(sets):
            owner[vertices] = index
        source_owner = owner[remaining.rows]
        inside = (source_owner >= 0) & (source_owner == owner[remaining.cols])
        for index, (_, phi) in enumerate(sets):
            mask = inside & (source_owner == index)
            piece = remaining.restrict(mask)
            cover = _pattern(piece).scale(cover_weight / 2)
            info = PieceInfo(
                bucket=bucket,
                round=round_,
                support=len(piece.support()),
                nnz=piece.nnz,
                phi=phi,
            )
            publish(
                event_bus,
                PieceCertifiedEvent(
                    type="piece_certified",
                    bucket=bucket,
                    round=round_,
                    support=info.support,
                    nnz=info.nnz,
                    phi=phi,
                ),
            )
            results.append((piece, cover, info))
        progress = float(inside.sum()) / remaining.nnz
        if progress < config.progress_fraction:
            logger.warning(
                "Bucket %d round %d certified only %.1f%% of %d edges",
                bucket,
                round_,
                100 * progress,
                remaining.nnz,
            )
        remaining = remaining.restrict(~inside)
    if remaining.nnz > 0:
        raise NonterminatingDecompositionError(
            f"Bucket {bucket} still has {remaining.nnz} edges after {limit} rounds",
            bucket=bucket,
            rounds=limit,
            remaining=remaining.nnz,
        )
    return results, rounds


def find_decomposition(
    laplacian: DirectedLaplacian,
    phi_target: float | None = None,
    seed: int = 0,
    *,
    config: DecompositionConfig = DECOMPOSITION_DEFAULT,
    event_bus: EventBus | None = None,
) -> Decomposition:
    """
    Decompose a directed Laplacian into pieces covered by expanders.

    Edges with weight in [w_min 2^b, w_min 2^(b+1)) form bucket b, for
    ceil(log2(w_max / w_min)) + 1 buckets. Buckets are processed concurrently;
    each uses at most ceil(log2 nnz) + 1 rounds.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Laplacian to decompose.
    phi_target : float, optional
        Conductance certified by every piece, in (0, 1).
        By default c_phi / ln(n + 1)^2.
    seed : int, optional
        Seed of the sweeps. Parts are seeded by the hash of their vertex set.
    config : DecompositionConfig, optional
        Sweep and scheduling parameters.
    event_bus : EventBus, optional
        Receives a PieceCertifiedEvent per piece, possibly from worker threads.

    Returns
    -------
    Decomposition

    Raises
    ------
    NonterminatingDecompositionError
        If a bucket exceeds its round limit.

    """
    n = laplacian.n
    if phi_target is None:
        phi_target = config.phi_target(n)
    if not 0 < phi_target < 1:
        raise ValueError(f"phi_target must be in (0, 1), got {phi_target}")
    alpha = phi_target**2 / CHEEGER_DENOMINATOR
    adjacency = laplacian.adjacency.offdiagonal()
    if adjacency.nnz == 0:
        return Decomposition([], [], alpha, COVER_MULTIPLICITY, 0, phi_target)

    w_min = float(adjacency.weights.min())
    buckets = math.ceil(math.log2(float(adjacency.weights.max()) / w_min)) + 1
    bucket_of = np.clip(
        np.floor(np.log2(adjacency.weights / w_min)).astype(np.int64), 0, buckets - 1
    )
    occupied = [int(b) for b in np.unique(bucket_of)]
    logger.debug(
        "Decomposing %r: %d buckets (%d occupied), phi_target = %.4g",
        laplacian,
        buckets,
        len(occupied),
        phi_target,
    )
    workers = min(config.max_workers or thread_limit(), len(occupied))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(
                _decompose_bucket,
                adjacency.restrict(bucket_of == bucket),
                bucket,
                w_min * 2.0 ** (bucket + 1),
                phi_target,
                child_seed(seed, bucket),
                config,
                event_bus,
            )
            for bucket in occupied
        ]
        outcomes = [future.result() for future in futures]

    pieces, covers, info = [], [], []
    for results, _ in outcomes:
        for piece, cover, piece_info in results:
            pieces.append(validate_laplacian(piece, tol_eul=laplacian.tol_eul))
            covers.append(validate_laplacian(cover))
            info.append(piece_info)
    return Decomposition(
        pieces=pieces,
        covers=covers,
        alpha=alpha,
        beta=COVER_MULTIPLICITY,
        total_support=sum(item.support for item in info),
        phi_target=phi_target,
        info=info,
        rounds=max(rounds for _, rounds in outcomes),
        buckets=buckets,
    )
