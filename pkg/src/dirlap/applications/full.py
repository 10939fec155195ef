import logging
import math

import numpy as np

from numpy.typing import ArrayLike, NDArray

from dirlap.config import APPLICATION_DEFAULT, ApplicationConfig
from dirlap.core import DirectedLaplacian, project_orthogonal, require_full_support
from dirlap.events import EventBus
from dirlap.exceptions import InnerSolverFailureError
from dirlap.solver import InnerSolver, default_inner_solver, prepare_demand

from ._patch import solve_dominant
from .stationary import compute_stationary

logger = logging.getLogger(__name__)


def perturbation(
    laplacian: DirectedLaplacian, eps: float, config: ApplicationConfig
) -> float:
    """Diagonal shift eps * w_min / (c_pert * n^3)."""
    w_min = float(laplacian.adjacency.offdiagonal().weights.min())
    return eps * w_min / (config.c_pert * laplacian.n**3)


def solve_full(
    laplacian: DirectedLaplacian,
    b: ArrayLike,
    eps: float,
    inner: InnerSolver | None = None,
    *,
    config: ApplicationConfig = APPLICATION_DEFAULT,
    event_bus: EventBus | None = None,
) -> NDArray[np.float64]:
    """
    Solve L x = b for the Laplacian of any strongly connected graph.

    The diagonal is raised by delta = eps * w_min / (c_pert * n^3) and the
    approximate stationary scaling X of L makes (L + delta I + E) X row and
    column dominant, E absorbing the scaling error. One dominant solve of
    that system is the preconditioner of at most `refine_steps` Richardson
    steps on L, stopped once ||L x - b||_2 <= eps ||b||_2. Eulerian inputs
    use the inner solver directly as preconditioner.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Laplacian of a strongly connected graph on all its vertices.
    b : ArrayLike
        Demand; projected orthogonally to the all-ones vector if needed.
    eps : float
        Requested relative residual, in (0, 1).
    inner : InnerSolver, optional
        Eulerian solver handle. By default `solve_eulerian`.
    config : ApplicationConfig, optional
    event_bus : EventBus, optional

    Returns
    -------
    numpy.ndarray
        Solution orthogonal to the approximate kernel of L.

    Raises
    ------
    InnerSolverFailureError
        If an inner solve fails, or refinement ends above the requested
        residual.

    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    require_full_support(laplacian)
    demand, _ = prepare_demand(laplacian, b)
    n = laplacian.n
    if not np.any(demand):
        return np.zeros(n)
    inner = inner or default_inner_solver()
    inner_eps = max(config.min_inner_eps, eps / (n * n))

    if laplacian.eulerian:
        kernel = np.ones(n)

        def precondition(r: NDArray[np.float64]) -> NDArray[np.float64]:
            return np.asarray(inner(laplacian, r, inner_eps), dtype=np.float64)

    else:
        delta = perturbation(laplacian, eps, config)
        stationary = compute_stationary(
            laplacian,
            config.stationary_alpha,
            inner,
            config=config,
            event_bus=event_bus,
        )
        degrees = laplacian.out_degrees - laplacian.adjacency.diagonal()
        kernel = stationary.distribution / degrees
        image = laplacian.matvec(kernel) + delta * kernel
        excess = np.maximum(0.0, -image / kernel)
        adjacency = laplacian.adjacency.offdiagonal().scale_rows(kernel)
        diagonal = (degrees + delta + excess) * kernel
        logger.debug(
            "Full solve: delta = %.3e, max scaling excess %.3e",
            delta,
            float(excess.max()),
        )

        def precondition(r: NDArray[np.float64]) -> NDArray[np.float64]:
            return kernel * solve_dominant(adjacency, diagonal, r, inner_eps, inner)

    target = eps * float(np.linalg.norm(demand))
    solution = precondition(demand)
    for step in range(config.refine_steps):
        residual = demand - laplacian.matvec(solution)
        norm = float(np.linalg.norm(residual))
        logger.debug("Full solve refinement %d: residual %.3e", step, norm)
        if norm <= target:
            break
        solution = solution + precondition(residual)
    solution = project_orthogonal(solution, kernel)
    final = float(np.linalg.norm(demand - laplacian.matvec(solution)))
    if final > target and not math.isclose(final, target):
        relative = final / float(np.linalg.norm(demand))
        logger.error(
            "Full solve stopped at relative residual %.3e above %.3e", relative, eps
        )
        raise InnerSolverFailureError(
            f"Relative residual {relative:.3e} above {eps:.3e} after "
            f"{config.refine_steps} refinement steps",
            residual=relative,
            eps=eps,
            refine_steps=config.refine_steps,
        )
    return solution
