import logging
import math

from dataclasses import replace

import numpy as np

from dirlap.config import (
    DECOMPOSITION_DEFAULT,
    SAMPLING_DEFAULT,
    DecompositionConfig,
    SamplingConfig,
)
from dirlap.core import (
    DirectedLaplacian,
    require_strongly_connected,
    sum_graphs,
    validate_laplacian,
)
from dirlap.decompose import Decomposition, find_decomposition
from dirlap.events import EventBus
from dirlap.exceptions import (
    DeficitMismatchError,
    NotEulerianError,
    OversampleExhaustedError,
)
from dirlap.sampling import (
    SampleOutcome,
    default_policy,
    full_sample_multiplier,
    sparsify_subgraph,
)
from dirlap.utils import child_seed

from .verify import ApproximationCheck

logger = logging.getLogger(__name__)


def _check_probability(name: str, value: float) -> None:
    if not 0 < value < 1:
        raise ValueError(f"{name} must be in (0, 1), got {value}")


def _multiplier_range(
    decomposition: Decomposition, p: float, eps: float, config: SamplingConfig
) -> tuple[float, float]:
    """
    Oversample multipliers bracketing the sparsity search.

    Above the upper end every piece is kept exactly. At the lower end the
    pieces expect about one draw per nonzero row and column.
    """
    full = 0.0
    sparsest = math.inf
    for piece in decomposition.pieces:
        adjacency = piece.adjacency.offdiagonal()
        if adjacency.nnz == 0:
            continue
        full = max(full, full_sample_multiplier(piece, p, eps, config))
        support = len(np.unique(adjacency.rows)) + len(np.unique(adjacency.cols))
        sparsest = min(sparsest, support / config.sample_count(support, eps, p))
    return min(sparsest, full), full


def sparsify_eulerian(
    laplacian: DirectedLaplacian,
    p: float,
    eps: float,
    seed: int,
    *,
    sampling: SamplingConfig = SAMPLING_DEFAULT,
    decomposition: DecompositionConfig = DECOMPOSITION_DEFAULT,
    event_bus: EventBus | None = None,
) -> DirectedLaplacian:
    """
    Sparsify an Eulerian Laplacian while keeping it Eulerian.

    The Laplacian is decomposed into pieces with expander covers, every piece
    is sparsified with failure probability p / n^2 and the pieces are summed.
    Pieces are sampled at accuracy eps, or eps * alpha / (2 beta) with
    `sampling.certified_pieces`.

    With `sampling.verify`, the sum is checked against the input through
    ||U^{+/2} (L~ - L) U^{+/2}||_2 <= eps, where U is the symmetrization of L.
    A sample at the nominal number of draws is redrawn up to
    `sampling.max_resamples` times, then `sampling.search_steps` bisection
    steps over a draw multiplier look for the sparsest sample that still
    passes. The input itself is the fallback, so the result never has more
    edges than the input. Without verification a single nominal sample is
    returned.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Eulerian Laplacian of a strongly connected graph.
    p : float
        Failure probability, in (0, 1).
    eps : float
        Target accuracy, in (0, 1).
    seed : int
        Seed of the decomposition and the per-piece samples.
    sampling : SamplingConfig, optional
    decomposition : DecompositionConfig, optional
    event_bus : EventBus, optional
        Receives decomposition and sampling events.

    Returns
    -------
    DirectedLaplacian
        Eulerian Laplacian with the same in- and out-degrees.

    Raises
    ------
    NotEulerianError
        If in-degrees and out-degrees differ.
    NotStronglyConnectedError
        If the graph is not strongly connected.

    """
    _check_probability("p", p)
    _check_probability("eps", eps)
    if not laplacian.eulerian:
        raise NotEulerianError(
            "Eulerian sparsification needs equal in- and out-degrees",
            imbalance=float(abs(laplacian.imbalance()).max()),
        )
    require_strongly_connected(laplacian)

    result = find_decomposition(
        laplacian,
        seed=child_seed(seed, 0),
        config=decomposition,
        event_bus=event_bus,
    )
    n = laplacian.n
    piece_p = p / (n * n)
    piece_eps = (
        eps * result.alpha / (2 * result.beta) if sampling.certified_pieces else eps
    )
    piece_config = replace(sampling, verify=False)
    logger.debug(
        "Sparsifying %d pieces at eps = %.3e, p = %.3e",
        len(result.pieces),
        piece_eps,
        piece_p,
    )

    def draw(oversample: float, *key: int) -> DirectedLaplacian:
        pieces = [
            sparsify_subgraph(
                piece,
                piece_p,
                piece_eps,
                child_seed(seed, *key, index),
                oversample=oversample,
                config=piece_config,
                event_bus=event_bus,
            )
            for index, piece in enumerate(result.pieces)
        ]
        return validate_laplacian(
            sum_graphs((piece.adjacency for piece in pieces), n),
            tol_eul=laplacian.tol_eul,
        )

    if not sampling.verify:
        sparsified = draw(1.0, 1, 0)
        logger.debug("Sparsified %r to %r without verification", laplacian, sparsified)
        return sparsified

    check = ApproximationCheck(laplacian, sampling, child_seed(seed, 3))
    low, high = _multiplier_range(result, piece_p, piece_eps, sampling)
    best = laplacian
    if high > 1.0:
        high = 1.0

        def nominal(attempt: int) -> SampleOutcome:
            sample = draw(1.0, 1, attempt)
            return SampleOutcome(graph=sample.adjacency, eps=eps, norm=check(sample))

        context = default_policy(sampling.max_resamples).create_context()
        try:
            outcome = context.draw_with_resamples(nominal, event_bus)
        except (OversampleExhaustedError, DeficitMismatchError) as exc:
            logger.warning("Keeping %r exactly: %s", laplacian, exc)
            return laplacian
        if outcome.graph.nnz < laplacian.nnz:
            best = validate_laplacian(outcome.graph, tol_eul=laplacian.tol_eul)

    for step in range(sampling.search_steps if low < high else 0):
        middle = math.sqrt(low * high)
        try:
            candidate = draw(middle, 2, step)
        except DeficitMismatchError as exc:
            logger.debug(
                "Search step %d at %.3e failed to patch: %s", step, middle, exc
            )
            low = middle
            continue
        error = check(candidate)
        logger.debug(
            "Search step %d: multiplier %.3e, nnz %d, error %.3e",
            step,
            middle,
            candidate.nnz,
            error,
        )
        if error > eps:
            low = middle
            continue
        high = middle
        if candidate.nnz < best.nnz:
            best = candidate
    logger.debug("Sparsified %r to %r", laplacian, best)
    return best
