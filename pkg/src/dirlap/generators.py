"""Graph families used by the tests, the benchmark and the documentation."""

import numpy as np

from numpy.typing import ArrayLike, NDArray

from dirlap.core import DirectedLaplacian, SparseGraph, validate_laplacian
from dirlap.utils import make_rng


def _cycle_edges(
    vertices: NDArray[np.int64],
) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    return vertices, np.roll(vertices, -1)


def _laplacian(
    n: int,
    rows: list[NDArray[np.int64]],
    cols: list[NDArray[np.int64]],
    weights: list[NDArray[np.float64]],
) -> DirectedLaplacian:
    graph = SparseGraph(
        n, np.concatenate(rows), np.concatenate(cols), np.concatenate(weights)
    )
    return validate_laplacian(graph)


def directed_cycle(n: int, weight: float = 1.0) -> DirectedLaplacian:
    """Cycle 0 -> 1 -> ... -> n-1 -> 0."""
    rows, cols = _cycle_edges(np.arange(n))
    return validate_laplacian(SparseGraph(n, rows, cols, np.full(n, weight)))


def bidirected_path(n: int, weights: ArrayLike = 1.0) -> DirectedLaplacian:
    """Path with both orientations of every edge; `weights` per edge or scalar."""
    edge_weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), (n - 1,))
    heads = np.arange(n - 1)
    return _laplacian(
        n, [heads, heads + 1], [heads + 1, heads], [edge_weights, edge_weights]
    )


def bidirected_complete(n: int, weight: float = 1.0) -> DirectedLaplacian:
    rows, cols = np.nonzero(~np.eye(n, dtype=bool))
    return validate_laplacian(SparseGraph(n, rows, cols, np.full(len(rows), weight)))


def barbell(k: int, bridge: float = 1.0) -> DirectedLaplacian:
    """Two bidirected K_k joined by one bidirected edge of weight `bridge`."""
    clique = np.nonzero(~np.eye(k, dtype=bool))
    rows = [clique[0], clique[0] + k, np.array([k - 1, k])]
    cols = [clique[1], clique[1] + k, np.array([k, k - 1])]
    weights = [np.ones(len(clique[0])), np.ones(len(clique[0])), np.full(2, bridge)]
    return _laplacian(2 * k, rows, cols, weights)


def random_eulerian(
    n: int,
    cycles: int,
    seed: int,
    *,
    max_length: int | None = None,
    low: float = 1.0,
    high: float = 1.0,
) -> DirectedLaplacian:
    """
    Random strongly connected Eulerian graph.

    A Hamiltonian cycle on a random vertex order plus `cycles` random simple
    cycles of length 2..max_length, each with one weight drawn uniformly
    from [low, high].
    """
    rng = make_rng(seed)
    max_length = min(n, max_length or n)
    order = rng.permutation(n)
    first_rows, first_cols = _cycle_edges(order)
    rows, cols = [first_rows], [first_cols]
    weights = [np.full(n, rng.uniform(low, high))]
    for _ in range(cycles):
        length = int(rng.integers(2, max_length + 1)) if max_length >= 2 else 2
        vertices = rng.choice(n, size=length, replace=False)
        cycle_rows, cycle_cols = _cycle_edges(vertices)
        rows.append(cycle_rows)
        cols.append(cycle_cols)
        weights.append(np.full(length, rng.uniform(low, high)))
    return _laplacian(n, rows, cols, weights)


def two_scale_eulerian(
    n: int, cycles: int, seed: int, *, low: float = 1.0, high: float = 1e6
) -> DirectedLaplacian:
    """Random Eulerian graph whose cycles carry weight `low` or `high`."""
    rng = make_rng(seed)
    light = random_eulerian(
        n, cycles // 2, int(rng.integers(2**62)), low=low, high=low
    )
    heavy = random_eulerian(
        n, cycles - cycles // 2, int(rng.integers(2**62)), low=high, high=high
    )
    return validate_laplacian(light.adjacency + heavy.adjacency)


def random_strongly_connected(
    n: int,
    extra_edges: int,
    seed: int,
    *,
    low: float = 1.0,
    high: float = 2.0,
) -> DirectedLaplacian:
    """Hamiltonian cycle plus `extra_edges` random edges, weights in [low, high]."""
    if n < 2:
        raise ValueError(f"Need at least 2 vertices, got {n}")
    rng = make_rng(seed)
    order = rng.permutation(n)
    cycle_rows, cycle_cols = _cycle_edges(order)
    sources = rng.integers(0, n, size=extra_edges)
    offsets = rng.integers(1, n, size=extra_edges)
    targets = (sources + offsets) % n
    return _laplacian(
        n,
        [cycle_rows, sources],
        [cycle_cols, targets],
        [rng.uniform(low, high, size=n), rng.uniform(low, high, size=extra_edges)],
    )


def random_demand(n: int, seed: int) -> NDArray[np.float64]:
    """Standard normal vector with zero sum."""
    values = make_rng(seed).standard_normal(n)
    return values - values.mean()
