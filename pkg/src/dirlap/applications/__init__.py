__all__ = [
    "ScaleLadder",
    "ScaleLevel",
    "StationaryResult",
    "build_scale_ladder",
    "compute_stationary",
    "crude_solve_ill_conditioned",
    "dominant_patch",
    "eulerian_scale",
    "personalized_pagerank",
    "restart_graph",
    "solve_dominant",
    "solve_full",
    "sparsify_strongly_connected",
]

from ._patch import dominant_patch, solve_dominant
from .full import solve_full
from .pagerank import personalized_pagerank, restart_graph
from .reduction import (
    ScaleLadder,
    ScaleLevel,
    build_scale_ladder,
    crude_solve_ill_conditioned,
)
from .stationary import (
    StationaryResult,
    compute_stationary,
    eulerian_scale,
    sparsify_strongly_connected,
)
