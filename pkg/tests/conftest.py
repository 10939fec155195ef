import numpy as np
import pytest

from dirlap.core import DirectedLaplacian, SparseGraph, validate_laplacian
from dirlap.generators import (
    bidirected_complete,
    random_eulerian,
    random_strongly_connected,
)
from dirlap.oracle import dense_eulerian_solver
from dirlap.solver import InnerSolver


@pytest.fixture(scope="function")
def triangle() -> DirectedLaplacian:
    """Cycle 0 -> 1 -> 2 -> 0 plus the chord 0 -> 2; stationary (2, 1, 2) / 5."""
    return validate_laplacian(
        SparseGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (0, 2, 1.0)])
    )


@pytest.fixture(scope="function")
def eulerian() -> DirectedLaplacian:
    return random_eulerian(16, 24, seed=7, max_length=6, low=1.0, high=3.0)


@pytest.fixture(scope="function")
def strongly_connected() -> DirectedLaplacian:
    return random_strongly_connected(12, 30, seed=11)


@pytest.fixture(scope="function")
def complete() -> DirectedLaplacian:
    return bidirected_complete(40)


@pytest.fixture(scope="function")
def dense_inner() -> InnerSolver:
    """Exact inner Eulerian solver, so application tests isolate the reductions."""
    return dense_eulerian_solver


@pytest.fixture(scope="function")
def demand() -> np.ndarray:
    values = np.random.default_rng(3).standard_normal(16)
    return values - values.mean()
