__all__ = [
    "CHAIN_ALPHA",
    "ImplicitOperator",
    "InnerSolver",
    "OperatorBudget",
    "SquareChain",
    "base_solver",
    "build_chain",
    "default_inner_solver",
    "estimate_lambda",
    "identity_minus_walk",
    "precon_richardson",
    "prepare_demand",
    "richardson_operator",
    "scaled_identity",
    "solve_eulerian",
    "solve_recursive",
]

from .chain import CHAIN_ALPHA, SquareChain, build_chain
from .operators import (
    ImplicitOperator,
    OperatorBudget,
    identity_minus_walk,
    scaled_identity,
)
from .richardson import precon_richardson, richardson_operator
from .solve import (
    InnerSolver,
    base_solver,
    default_inner_solver,
    estimate_lambda,
    prepare_demand,
    solve_eulerian,
    solve_recursive,
)
