__all__ = [
    "DirectedLaplacian",
    "NormalizedWalk",
    "SparseGraph",
    "graph_symmetrization",
    "is_strongly_connected",
    "laplacian_from_matrix",
    "normalize",
    "project_orthogonal",
    "read_graph",
    "read_vector",
    "require_full_support",
    "require_strongly_connected",
    "sum_graphs",
    "symmetrization",
    "validate_laplacian",
    "write_graph",
    "write_vector",
]

from ._mtx import read_graph, read_vector, write_graph, write_vector
from .graph import SparseGraph, sum_graphs
from .laplacian import (
    DirectedLaplacian,
    NormalizedWalk,
    graph_symmetrization,
    is_strongly_connected,
    laplacian_from_matrix,
    normalize,
    project_orthogonal,
    require_full_support,
    require_strongly_connected,
    symmetrization,
    validate_laplacian,
)
