import logging
import math
import warnings

from dataclasses import dataclass, field

import numpy as np

from numpy.typing import NDArray

from dirlap.config import (
    APPLICATION_DEFAULT,
    DECOMPOSITION_DEFAULT,
    SAMPLING_DEFAULT,
    ApplicationConfig,
    DecompositionConfig,
    SamplingConfig,
)
from dirlap.core import (
    DirectedLaplacian,
    require_full_support,
    validate_laplacian,
)
from dirlap.events import EventBus, StationaryRoundEvent, publish
from dirlap.exceptions import DirlapWarning, ZeroDegreeVertexError
from dirlap.sampling import patch_to_degrees
from dirlap.solver import InnerSolver, default_inner_solver
from dirlap.sparsify import sparsify_eulerian

from ._patch import solve_dominant

logger = logging.getLogger(__name__)

# Iterate entries are floored at this fraction of the largest entry
CLIP_FLOOR = 1e-15
# Extra rounds stop once the residual shrinks by less than this factor
STALL_RATIO = 0.9


@dataclass(frozen=True)
class StationaryResult:
    """
    Approximate stationary distribution.

    Attributes
    ----------
    distribution : numpy.ndarray
        Nonnegative, sums to 1.
    iterations : int
        Rounds performed.
    residual : float
        ||L x||_1 / ||D x||_1 of the final iterate, with D x proportional
        to the distribution.
    trace : list[float]
        Residual after every round.

    """

    distribution: NDArray[np.float64]
    iterations: int
    residual: float
    trace: list[float] = field(default_factory=list)


def _inner_eps(alpha: float, n: int, config: ApplicationConfig) -> float:
    return max(
        config.min_inner_eps,
        config.c_stat * (alpha / n) ** config.stationary_power,
    )


def compute_stationary(
    laplacian: DirectedLaplacian,
    alpha: float,
    inner: InnerSolver | None = None,
    *,
    eps: float | None = None,
    config: ApplicationConfig = APPLICATION_DEFAULT,
    event_bus: EventBus | None = None,
) -> StationaryResult:
    """
    Stationary distribution of the random walk of a strongly connected graph.

    Starting from x = D^{-1} 1, every round sets
    e = alpha D + max(0, -(L x) / x), solves the row- and column-dominant
    system (E + L) X z = E x / ||E x||_1 through one Eulerian solve, and
    continues with x = X z rescaled to ||D x||_1 = 1. Rounds run at least
    ceil(3 ln(1 / alpha)) times and continue until ||L x||_1 falls to
    `config.stationary_tolerance`, at most `config.max_stationary_rounds`
    times or until the residual stalls. The distribution is D x / ||D x||_1.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Laplacian of a strongly connected graph on all its vertices.
    alpha : float
        Restart parameter in (0, 1/2].
    inner : InnerSolver, optional
        Eulerian solver handle. By default `solve_eulerian`.
    eps : float, optional
        Inner accuracy. By default c_stat * (alpha / n)^stationary_power,
        floored at min_inner_eps.
    config : ApplicationConfig, optional
    event_bus : EventBus, optional
        Receives a StationaryRoundEvent per round.

    Returns
    -------
    StationaryResult

    Raises
    ------
    NotStronglyConnectedError
        If the graph is not strongly connected.
    InnerSolverFailureError
        If an inner solve fails.

    """
    if not 0 < alpha <= 0.5:
        raise ValueError(f"alpha must be in (0, 1/2], got {alpha}")
    require_full_support(laplacian)
    n = laplacian.n
    if n == 1:
        return StationaryResult(np.ones(1), 0, 0.0, [])
    inner = inner or default_inner_solver()
    inner_eps = eps if eps is not None else _inner_eps(alpha, n, config)
    adjacency = laplacian.adjacency.offdiagonal()
    degrees = laplacian.out_degrees - laplacian.adjacency.diagonal()
    if np.any(degrees <= 0):
        vertex = int(np.argmin(degrees))
        raise ZeroDegreeVertexError(
            f"Vertex {vertex} has no outgoing edge", vertex=vertex
        )
    rounds = math.ceil(3 * math.log(1 / alpha))
    limit = max(rounds, config.max_stationary_rounds)
    logger.debug(
        "Stationary: n = %d, alpha = %.3g, %d to %d rounds, inner eps = %.3e",
        n,
        alpha,
        rounds,
        limit,
        inner_eps,
    )

    x = 1 / degrees
    x = x / float(np.sum(degrees * x))
    trace: list[float] = []
    for step in range(limit):
        image = laplacian.matvec(x)
        excess = alpha * degrees + np.maximum(0.0, -image / x)
        weighted = excess * x
        demand = weighted / float(weighted.sum())
        z = solve_dominant(
            adjacency.scale_rows(x),
            (excess + degrees) * x,
            demand,
            inner_eps,
            inner,
        )
        updated = x * z
        floor = CLIP_FLOOR * float(np.abs(updated).max())
        if np.any(updated <= floor):
            logger.warning(
                "Clipped %d stationary iterate entries in round %d",
                int(np.count_nonzero(updated <= floor)),
                step,
            )
            updated = np.maximum(updated, floor)
        x = updated / float(np.sum(degrees * updated))
        residual = float(np.abs(laplacian.matvec(x)).sum())
        trace.append(residual)
        logger.debug("Stationary round %d: residual %.3e", step, residual)
        publish(
            event_bus,
            StationaryRoundEvent(
                type="stationary_round", round=step, residual=residual
            ),
        )
        if step + 1 < rounds:
            continue
        if residual <= config.stationary_tolerance:
            break
        if len(trace) > 1 and residual > STALL_RATIO * trace[-2]:
            logger.warning(
                "Stationary residual stalled at %.3e in round %d", residual, step
            )
            break
    else:
        logger.warning(
            "Stationary residual %.3e above %.3e after %d rounds",
            trace[-1],
            config.stationary_tolerance,
            limit,
        )

    distribution = degrees * x
    distribution = distribution / float(distribution.sum())
    return StationaryResult(
        distribution=distribution,
        iterations=len(trace),
        residual=trace[-1],
        trace=trace,
    )


def eulerian_scale(
    laplacian: DirectedLaplacian,
    inner: InnerSolver | None = None,
    *,
    config: ApplicationConfig = APPLICATION_DEFAULT,
    event_bus: EventBus | None = None,
) -> tuple[NDArray[np.float64], DirectedLaplacian]:
    """
    Positive x with L diag(x) Eulerian.

    x is D^{-1} times the stationary distribution, normalized to sum(x) = n.
    The remaining Eulerian defect of L diag(x) is closed by a degree patch;
    a DirlapWarning is emitted when its mass exceeds `scaling_tolerance`
    relative to the total edge weight.

    Returns
    -------
    tuple[numpy.ndarray, DirectedLaplacian]
        The scaling and the Eulerian Laplacian L diag(x).

    """
    n = laplacian.n
    if laplacian.eulerian:
        return np.ones(n), laplacian
    stationary = compute_stationary(
        laplacian,
        config.stationary_alpha,
        inner,
        config=config,
        event_bus=event_bus,
    )
    degrees = laplacian.out_degrees - laplacian.adjacency.diagonal()
    x = stationary.distribution / degrees
    x = x * (n / float(x.sum()))

    scaled = laplacian.adjacency.offdiagonal().scale_rows(x)
    target = np.maximum(scaled.row_sums(), scaled.col_sums())
    patch = patch_to_degrees(scaled, target, target, forbid_diagonal=True)
    total = float(scaled.weights.sum())
    if patch.total_mass > config.scaling_tolerance * total:
        message = (
            f"Eulerian scaling patch carries {patch.total_mass / total:.3e} "
            "of the total weight"
        )
        logger.warning("%s", message)
        warnings.warn(message, DirlapWarning, stacklevel=2)
    repaired = scaled + patch.to_graph()
    average = float(target.sum()) / n
    return x, validate_laplacian(repaired, tol_eul=1e-10 * average)


def sparsify_strongly_connected(
    laplacian: DirectedLaplacian,
    p: float,
    eps: float,
    seed: int,
    *,
    inner: InnerSolver | None = None,
    sampling: SamplingConfig = SAMPLING_DEFAULT,
    decomposition: DecompositionConfig = DECOMPOSITION_DEFAULT,
    config: ApplicationConfig = APPLICATION_DEFAULT,
    event_bus: EventBus | None = None,
) -> DirectedLaplacian:
    """
    Sparsify a strongly connected Laplacian by Eulerian scaling.

    Computes L diag(x) Eulerian, sparsifies it with `sparsify_eulerian` and
    returns the sparsifier times diag(x)^{-1}.
    """
    x, scaled = eulerian_scale(laplacian, inner, config=config, event_bus=event_bus)
    sparse = sparsify_eulerian(
        scaled,
        p,
        eps,
        seed,
        sampling=sampling,
        decomposition=decomposition,
        event_bus=event_bus,
    )
    return sparse.scale_columns(1 / x)
