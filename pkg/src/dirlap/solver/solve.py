import logging
import math
import time
import warnings

from dataclasses import asdict
from typing import Callable, TypeAlias

import numpy as np
import scipy.sparse as sp

from numpy.typing import ArrayLike, NDArray
from scipy.sparse.linalg import LinearOperator, cg

from dirlap.config import (
    DECOMPOSITION_DEFAULT,
    SAMPLING_DEFAULT,
    SOLVER_DEFAULT,
    DecompositionConfig,
    SamplingConfig,
    SolverConfig,
)
from dirlap.core import (
    DirectedLaplacian,
    NormalizedWalk,
    SparseGraph,
    normalize,
    project_orthogonal,
    require_full_support,
)
from dirlap.events import EventBus, SolveEvent, publish
from dirlap.exceptions import (
    DemandProjectedWarning,
    LambdaEstimateFailedError,
    NonFiniteError,
    NotEulerianError,
)
from dirlap.reports import SolveReport
from dirlap.utils import child_seed, make_rng

from .chain import CHAIN_ALPHA, SquareChain, build_chain
from .operators import (
    ImplicitOperator,
    OperatorBudget,
    identity_minus_walk,
    scaled_identity,
)
from .richardson import precon_richardson, richardson_operator

logger = logging.getLogger(__name__)

InnerSolver: TypeAlias = Callable[
    [DirectedLaplacian, NDArray[np.float64], float], NDArray[np.float64]
]

PROJECTION_RTOL = 1e-12


def estimate_lambda(
    walk: SparseGraph,
    kernel: NDArray[np.float64],
    iterations: int = SOLVER_DEFAULT.lambda_iterations,
    seed: int = 0,
) -> float:
    """
    Lower bound on the smallest nonzero eigenvalue of I - (W + W^T) / 2.

    Runs inverse power iteration orthogonally to `kernel`, solving each step
    with Jacobi-preconditioned conjugate gradients, and halves the final
    Rayleigh quotient so the result lies in [lambda / 2, lambda].

    Parameters
    ----------
    walk : SparseGraph
        Walk W with W k = W^T k = k for the kernel vector k.
    kernel : numpy.ndarray
        Unit kernel vector.
    iterations : int, optional
        Inverse power iterations.
    seed : int, optional
        Seed of the starting vector.

    Returns
    -------
    float

    Raises
    ------
    LambdaEstimateFailedError
        If the iteration breaks down or the estimate is not positive.

    """
    n = walk.n
    csr = walk.csr
    symmetric = sp.csr_array(sp.identity(n, format="csr") - 0.5 * (csr + csr.T))
    diagonal = symmetric.diagonal()
    diagonal = np.where(diagonal > 0, diagonal, 1.0)
    jacobi = LinearOperator((n, n), matvec=lambda x: np.ravel(x) / diagonal)
    vector = project_orthogonal(make_rng(seed).standard_normal(n), kernel)
    for _ in range(iterations):
        norm = float(np.linalg.norm(vector))
        if not math.isfinite(norm) or norm == 0:
            raise LambdaEstimateFailedError("Inverse power iteration broke down")
        vector = vector / norm
        solution, info = cg(symmetric, vector, rtol=1e-10, maxiter=20 * n, M=jacobi)
        if info > 0:
            logger.debug("Conjugate gradients stopped after %d iterations", info)
        vector = project_orthogonal(solution, kernel)
    norm = float(np.linalg.norm(vector))
    if not math.isfinite(norm) or norm == 0:
        raise LambdaEstimateFailedError("Inverse power iteration broke down")
    vector = vector / norm
    quotient = float(vector @ (symmetric @ vector))
    if not math.isfinite(quotient) or quotient <= 0:
        raise LambdaEstimateFailedError(
            f"Rayleigh quotient {quotient!r} does not bound a positive eigenvalue",
            quotient=quotient,
        )
    return 0.5 * quotient


def _depth_error(d: int, config: SolverConfig) -> float:
    """exp(-error_decay sqrt(d ln d)) / inner_denominator, d < 2 treated as 0."""
    exponent = math.sqrt(d * math.log(d)) if d >= 2 else 0.0
    return math.exp(-config.error_decay * exponent) / config.inner_denominator


def _jump(d: int, level: int) -> int:
    """Levels skipped by one recursion step: min(ceil(sqrt(d log2 d)), d - level)."""
    if d < 2:
        return d - level
    return min(math.ceil(math.sqrt(d * math.log2(d))), d - level)


def base_solver(
    walk: NormalizedWalk,
    lambda_hat: float,
    d: int,
    eps: float,
    *,
    config: SolverConfig = SOLVER_DEFAULT,
    budget: OperatorBudget | None = None,
    seed: int = 0,
) -> ImplicitOperator:
    """
    Richardson iteration on I - W_d with a scaled identity preconditioner.

    The gap is taken as ell = min(ell_cap, growth^d * 0.9 * lambda_hat), raised
    to the measured gap of W_d when `config.measure_base_gap` is set. The step
    is `config.base_step` (ell / 4 when None) and the iteration count is
    ceil(base_iteration_factor / ell^base_iteration_power * ln(1 / eps)).

    Parameters
    ----------
    walk : NormalizedWalk
        Last walk W_d of the chain.
    lambda_hat : float
        Gap estimate of the first level.
    d : int
        Chain length.
    eps : float
        Requested accuracy, in (0, 1].
    config : SolverConfig, optional
    budget : OperatorBudget, optional
        Shared application counter.
    seed : int, optional
        Seed of the measured gap estimate.

    Returns
    -------
    ImplicitOperator

    """
    ell = config.growth**d * 0.9 * lambda_hat
    if config.measure_base_gap:
        ell = max(
            ell,
            estimate_lambda(walk.walk, walk.kernel, config.lambda_iterations, seed),
        )
    ell = min(config.ell_cap, ell)
    step = config.base_step if config.base_step is not None else ell / 4
    iterations = (
        0
        if eps >= 1
        else math.ceil(
            config.base_iteration_factor
            / ell**config.base_iteration_power
            * math.log(1 / eps)
        )
    )
    logger.debug(
        "Base solver: ell = %.4g, step = %.4g, %d iterations", ell, step, iterations
    )
    system = identity_minus_walk(walk.walk, walk.kernel, budget)
    return richardson_operator(
        system,
        scaled_identity(walk.n, 1.0, walk.kernel),
        step,
        iterations,
        name=f"base(d={d})",
    )


def _lazy_sum(
    chain: SquareChain, level: int, budget: OperatorBudget | None
) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
    """x -> (I + W_level^(alpha)) x."""
    lazy = chain.lazy(level)

    def apply(x: NDArray[np.float64]) -> NDArray[np.float64]:
        if budget is not None:
            budget.charge()
        return x + lazy.matvec(x)

    return apply


def solve_recursive(
    chain: SquareChain,
    level: int,
    lambda_hat: float,
    eps: float,
    *,
    config: SolverConfig = SOLVER_DEFAULT,
    budget: OperatorBudget | None = None,
    seed: int = 0,
) -> ImplicitOperator:
    """
    Approximate pseudoinverse of I - W_level built from the rest of the chain.

    With Delta = min(ceil(sqrt(d log2 d)), d - level), the preconditioner is
    (1 - alpha)^Delta Z_{level + Delta} (I + W_{level+Delta-1}^(alpha)) ...
    (I + W_level^(alpha)), where Z_{level + Delta} is built recursively with
    accuracy exp(-error_decay Delta) / inner_denominator. It is wrapped in
    ceil(ln(1 / eps)) Richardson steps on I - W_level.

    Parameters
    ----------
    chain : SquareChain
    level : int
        Index i of the walk to invert.
    lambda_hat : float
        Gap estimate of the first level.
    eps : float
        Requested accuracy.
    config : SolverConfig, optional
    budget : OperatorBudget, optional
        Shared application counter; exceeding it raises
        RecursionBudgetExceededError while the operator is applied.
    seed : int, optional

    Returns
    -------
    ImplicitOperator

    """
    d = chain.d
    if level == d:
        return base_solver(
            chain.walks[d], lambda_hat, d, eps, config=config, budget=budget, seed=seed
        )
    jump = _jump(d, level)
    inner = solve_recursive(
        chain,
        level + jump,
        lambda_hat,
        math.exp(-config.error_decay * jump) / config.inner_denominator,
        config=config,
        budget=budget,
        seed=seed,
    )
    products = [_lazy_sum(chain, j, budget) for j in range(level, level + jump)]
    factor = (1 - chain.alpha) ** jump

    def precondition(x: NDArray[np.float64]) -> NDArray[np.float64]:
        for product in products:
            x = product(x)
        return factor * inner.apply(x)

    preconditioner = ImplicitOperator(
        precondition,
        chain.n,
        kernel=chain.kernel,
        cost=inner.cost + jump,
        name=f"Z~({level})",
    )
    walk = chain.walks[level]
    iterations = math.ceil(math.log(1 / eps)) if eps < 1 else 0
    logger.debug(
        "Recursion level %d: Delta = %d, inner eps = %.3e, %d iterations",
        level,
        jump,
        math.exp(-config.error_decay * jump) / config.inner_denominator,
        iterations,
    )
    return richardson_operator(
        identity_minus_walk(walk.walk, walk.kernel, budget),
        preconditioner,
        1.0,
        iterations,
        name=f"solve({level})",
    )


def prepare_demand(
    laplacian: DirectedLaplacian, b: ArrayLike
) -> tuple[NDArray[np.float64], bool]:
    """
    Check a demand and project it orthogonally to the all-ones vector.

    Returns the projected demand and whether the projection moved it by more
    than 1e-12 relative, in which case a DemandProjectedWarning is emitted.
    """
    demand = np.asarray(b, dtype=np.float64).ravel()
    if len(demand) != laplacian.n:
        raise ValueError(f"Demand has length {len(demand)}, expected {laplacian.n}")
    if not np.all(np.isfinite(demand)):
        raise NonFiniteError("Demand entries must be finite")
    projected = project_orthogonal(demand, np.ones(laplacian.n))
    norm = float(np.linalg.norm(demand))
    shift = float(np.linalg.norm(projected - demand))
    moved = norm > 0 and shift > PROJECTION_RTOL * norm
    if moved:
        logger.warning("Demand is not orthogonal to the all-ones vector; projecting")
        warnings.warn(
            "Demand projected orthogonally to the all-ones vector",
            DemandProjectedWarning,
            stacklevel=3,
        )
    return projected, moved


def solve_eulerian(
    laplacian: DirectedLaplacian,
    b: ArrayLike,
    eps: float,
    *,
    seed: int = 0,
    config: SolverConfig = SOLVER_DEFAULT,
    sampling: SamplingConfig = SAMPLING_DEFAULT,
    decomposition: DecompositionConfig = DECOMPOSITION_DEFAULT,
    event_bus: EventBus | None = None,
) -> NDArray[np.float64]:
    """
    Solve L x = b for an Eulerian Laplacian of a strongly connected graph.

    Estimates lambda_hat for the normalized Laplacian, builds a chain of
    length d = ceil(depth_factor ln(1 / lambda_hat)) with accuracy
    exp(-error_decay sqrt(d ln d)) / inner_denominator, and runs
    ceil(outer_factor ln(1 / eps)) Richardson steps on D^{-1/2} L D^{-1/2}
    preconditioned by the recursive solver. A SolveEvent carrying the
    SolveReport is published when done.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Eulerian Laplacian of a strongly connected graph.
    b : ArrayLike
        Demand; projected orthogonally to the all-ones vector if needed,
        with a DemandProjectedWarning.
    eps : float
        Requested accuracy in the symmetrization norm, in (0, 1).
    seed : int, optional
        Seed of the chain and of the gap estimates.
    config : SolverConfig, optional
    sampling : SamplingConfig, optional
    decomposition : DecompositionConfig, optional
    event_bus : EventBus, optional

    Returns
    -------
    numpy.ndarray
        Solution orthogonal to the all-ones vector.

    Raises
    ------
    NotEulerianError
        If the Laplacian is not Eulerian.
    NotStronglyConnectedError
        If its graph is not strongly connected.
    LambdaEstimateFailedError
        If the gap cannot be estimated.
    RecursionBudgetExceededError
        If the solve exceeds its application budget.

    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if not laplacian.eulerian:
        raise NotEulerianError(
            "Eulerian solver needs equal in- and out-degrees",
            imbalance=float(np.abs(laplacian.imbalance()).max()),
        )
    require_full_support(laplacian)
    demand, projected = prepare_demand(laplacian, b)
    if not np.any(demand):
        return np.zeros(laplacian.n)

    start = time.perf_counter()
    walk = normalize(laplacian)
    lambda_hat = estimate_lambda(
        walk.walk, walk.kernel, config.lambda_iterations, child_seed(seed, 0)
    )
    depth = max(0, math.ceil(config.depth_factor * math.log(1 / lambda_hat)))
    eps_hat = _depth_error(depth, config)
    logger.debug(
        "Eulerian solve: n = %d, lambda_hat = %.4g, d = %d, eps_hat = %.3e",
        laplacian.n,
        lambda_hat,
        depth,
        eps_hat,
    )
    n = laplacian.n
    chain = build_chain(
        laplacian,
        depth,
        CHAIN_ALPHA,
        eps_hat,
        1 / (n * n),
        child_seed(seed, 1),
        first_eps=config.sparsify_eps,
        sampling=sampling,
        decomposition=decomposition,
        event_bus=event_bus,
    )
    budget = OperatorBudget.for_chain(n, depth, config.c_budget)
    preconditioner = solve_recursive(
        chain,
        0,
        lambda_hat,
        eps_hat,
        config=config,
        budget=budget,
        seed=child_seed(seed, 2),
    )
    system = identity_minus_walk(walk.walk, walk.kernel, budget)
    iterations = math.ceil(config.outer_factor * math.log(1 / eps))
    scaled = precon_richardson(
        system, preconditioner, demand / walk.sqrt_degrees, 1.0, iterations
    )
    solution = project_orthogonal(scaled / walk.sqrt_degrees, np.ones(n))

    residual = float(
        np.linalg.norm(laplacian.matvec(solution) - demand) / np.linalg.norm(demand)
    )
    report = SolveReport(
        eps=eps,
        seed=seed,
        lambda_hat=lambda_hat,
        depth=depth,
        eps_hat=eps_hat,
        applications=budget.used,
        wall_time=time.perf_counter() - start,
        residual=residual,
        projected=projected,
        chain_nnz=chain.nnz(),
        parameters={
            "solver": asdict(config),
            "sampling": asdict(sampling),
            "decomposition": asdict(decomposition),
            "outer_iterations": iterations,
        },
    )
    logger.debug(
        "Eulerian solve done: residual %.3e, %d applications",
        residual,
        budget.used,
    )
    publish(event_bus, SolveEvent(type="solve", report=report))
    return solution


def default_inner_solver(seed: int = 0) -> InnerSolver:
    """Inner solver handle backed by `solve_eulerian`."""

    def inner(
        laplacian: DirectedLaplacian, b: NDArray[np.float64], eps: float
    ) -> NDArray[np.float64]:
        return solve_eulerian(laplacian, b, eps, seed=seed)

    return inner
