import logging
import math

import numpy as np

from dirlap.config import SAMPLING_DEFAULT, SamplingConfig, SamplingScheme
from dirlap.core import DirectedLaplacian, SparseGraph, validate_laplacian
from dirlap.events import EventBus, SampleEvent, publish
from dirlap.utils import child_seed, make_rng

from .distribution import (
    EntryDistribution,
    build_distribution,
    sample_average,
    sample_independent,
)
from .patching import rebalance
from .policy import ResamplePolicy, default_policy
from .rules import SampleOutcome

logger = logging.getLogger(__name__)


def _inverse_sqrt(values: np.ndarray) -> np.ndarray:
    result = np.zeros_like(values)
    positive = values > 0
    result[positive] = 1 / np.sqrt(values[positive])
    return result


def normalized_error(
    original: SparseGraph,
    sample: SparseGraph,
    iterations: int = SAMPLING_DEFAULT.verify_iterations,
    seed: int = 0,
) -> float:
    """
    Power-method estimate of ||R^{-1/2} (sample - original) C^{-1/2}||_2.

    R and C are the row and column sums of `original`. The estimate is a lower
    bound that converges to the norm.
    """
    row_scale = _inverse_sqrt(original.row_sums())
    col_scale = _inverse_sqrt(original.col_sums())
    difference = SparseGraph(
        original.n,
        np.concatenate([sample.rows, original.rows]),
        np.concatenate([sample.cols, original.cols]),
        np.concatenate([sample.weights, -original.weights]),
        kind="general",
    )
    matrix = difference.scale_rows(row_scale).scale_cols(col_scale).csr
    vector = make_rng(seed).standard_normal(original.n) * (col_scale > 0)
    norm = float(np.linalg.norm(vector))
    if norm == 0:
        return 0.0
    vector /= norm
    for _ in range(iterations):
        image = matrix.T @ (matrix @ vector)
        norm = float(np.linalg.norm(image))
        if norm == 0:
            return 0.0
        vector = image / norm
    return float(np.linalg.norm(matrix @ vector))


def _keeps_everything(
    distribution: EntryDistribution, draws: float, scheme: SamplingScheme
) -> bool:
    if scheme == "independent":
        return draws * float(distribution.probabilities.min()) >= 1
    return draws >= distribution.graph.nnz


def full_sample_multiplier(
    laplacian: DirectedLaplacian,
    p: float,
    eps: float,
    config: SamplingConfig = SAMPLING_DEFAULT,
) -> float:
    """
    Smallest `oversample` at which `sparsify_subgraph` returns its input.

    Returns 0 for a Laplacian without edges.
    """
    adjacency = laplacian.adjacency.offdiagonal()
    if adjacency.nnz == 0:
        return 0.0
    distribution = build_distribution(adjacency, 0)
    draws = config.sample_count(distribution.support, eps, p)
    if config.scheme == "independent":
        return 1 / (draws * float(distribution.probabilities.min()))
    return adjacency.nnz / draws


def sparsify_subgraph(
    laplacian: DirectedLaplacian,
    p: float,
    eps: float,
    seed: int,
    *,
    oversample: float = 1.0,
    config: SamplingConfig = SAMPLING_DEFAULT,
    policy: ResamplePolicy | None = None,
    event_bus: EventBus | None = None,
) -> DirectedLaplacian:
    """
    Sparsify a directed Laplacian by entrywise sampling, keeping its degrees.

    Samples with k = oversample * c_sample * s * eps^-2 * ln(s / p) draws,
    where s counts nonzero rows plus nonzero columns of the adjacency, scales
    the sample by (1 + eps/4)^-1 and patches in- and out-degrees back to their
    exact values. The input is returned unchanged when the sampler would keep
    every entry, or when the patched sample is not sparser than the input.

    With `config.verify`, every sample is checked with the power method and
    redrawn according to `policy` while ||D_out^{-1/2} (A~ - A) D_in^{-1/2}||_2
    exceeds eps.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Laplacian to sparsify.
    p : float
        Failure probability, in (0, 1).
    eps : float
        Target accuracy, positive.
    seed : int
        Seed of the draws; resamples derive child seeds from it.
    oversample : float, default 1.0
        Multiplier on the number of draws.
    config : SamplingConfig, optional
        Sampling constants; `config.scheme` picks the sampler.
    policy : ResamplePolicy, optional
        Resample policy. By default `config.max_resamples` redraws on a failed
        norm check or an unbalanced patch.
    event_bus : EventBus, optional
        Receives SampleEvent and ResampleEvent.

    Returns
    -------
    DirectedLaplacian
        Laplacian with identical in- and out-degrees and at most as many
        edges as the input.

    Raises
    ------
    OversampleExhaustedError
        If every allowed sample failed the norm check.
    DeficitMismatchError
        If every allowed sample failed to patch.

    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not 0 < p < 1:
        raise ValueError(f"p must be in (0, 1), got {p}")
    if oversample <= 0:
        raise ValueError(f"oversample must be positive, got {oversample}")
    adjacency = laplacian.adjacency.offdiagonal()
    if adjacency.nnz == 0:
        return laplacian
    distribution = build_distribution(adjacency, seed)
    draws = oversample * config.sample_count(distribution.support, eps, p)
    if _keeps_everything(distribution, draws, config.scheme):
        logger.debug(
            "Keeping subgraph exactly: %.0f draws for %d edges", draws, adjacency.nnz
        )
        return laplacian
    logger.debug(
        "Sparsifying subgraph: nnz = %d, s = %d, k = %.0f, eps = %.3g, p = %.3g",
        adjacency.nnz,
        distribution.support,
        draws,
        eps,
        p,
    )
    row_sums = distribution.row_sums
    col_sums = distribution.col_sums

    def draw(attempt: int) -> SampleOutcome:
        attempt_seed = child_seed(seed, attempt)
        attempt_distribution = distribution.with_seed(attempt_seed)
        if config.scheme == "independent":
            sample = sample_independent(attempt_distribution, draws)
        else:
            sample = sample_average(
                attempt_distribution, math.ceil(draws), config.chunk_size
            )
        patched = rebalance(sample, row_sums, col_sums, eps, forbid_diagonal=True)
        norm = (
            normalized_error(
                adjacency,
                patched,
                config.verify_iterations,
                child_seed(attempt_seed, 0),
            )
            if config.verify
            else None
        )
        publish(
            event_bus,
            SampleEvent(
                type="sample",
                attempt=attempt,
                draws=math.ceil(draws),
                nnz_in=adjacency.nnz,
                nnz_out=patched.nnz,
                norm=norm,
            ),
        )
        return SampleOutcome(graph=patched, eps=eps, norm=norm)

    context = (policy or default_policy(config.max_resamples)).create_context()
    outcome = context.draw_with_resamples(draw, event_bus)
    if outcome.graph.nnz >= adjacency.nnz:
        logger.debug(
            "Keeping subgraph exactly: patched sample has %d of %d edges",
            outcome.graph.nnz,
            adjacency.nnz,
        )
        return laplacian
    return validate_laplacian(outcome.graph, tol_eul=laplacian.tol_eul)
