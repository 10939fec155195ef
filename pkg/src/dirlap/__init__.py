__version__ = "0.1.0"

__all__ = [
    "DirectedLaplacian",
    "NormalizedWalk",
    "SparseGraph",
    "EventBus",
    "Decomposition",
    "ResamplePolicy",
    "compute_stationary",
    "crude_solve_ill_conditioned",
    "find_decomposition",
    "personalized_pagerank",
    "solve_eulerian",
    "solve_full",
    "sparsify_eulerian",
    "sparsify_square",
    "sparsify_strongly_connected",
    "validate_laplacian",
]

from .applications import (
    compute_stationary,
    crude_solve_ill_conditioned,
    personalized_pagerank,
    solve_full,
    sparsify_strongly_connected,
)
from .core import DirectedLaplacian, NormalizedWalk, SparseGraph, validate_laplacian
from .decompose import Decomposition, find_decomposition
from .events import EventBus
from .sampling import ResamplePolicy
from .solver import solve_eulerian
from .sparsify import sparsify_eulerian, sparsify_square
