import logging

from dataclasses import dataclass

import numpy as np

from numpy.typing import NDArray

from dirlap.config import (
    DECOMPOSITION_DEFAULT,
    SAMPLING_DEFAULT,
    DecompositionConfig,
    SamplingConfig,
)
from dirlap.core import (
    DirectedLaplacian,
    NormalizedWalk,
    SparseGraph,
    normalize,
    require_strongly_connected,
)
from dirlap.events import ChainLevelEvent, EventBus, publish
from dirlap.exceptions import ChainKernelDriftError, NotEulerianError
from dirlap.sparsify import sparsify_eulerian, sparsify_square
from dirlap.utils import child_seed

logger = logging.getLogger(__name__)

CHAIN_ALPHA = 0.25
KERNEL_DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class SquareChain:
    """
    Square-sparsifier chain W_0, ..., W_d sharing the degrees D.

    I - W_0 approximates D^{-1/2} L D^{-1/2} and every I - W_{i+1}
    approximates I - (W_i^(alpha))^2, where W^(alpha) = alpha I + (1 - alpha) W.
    All walks fix the kernel direction D^{1/2} 1.

    Attributes
    ----------
    degrees : numpy.ndarray
        Shared degrees D.
    walks : list[NormalizedWalk]
        W_0 ... W_d.
    alpha : float
        Laziness, always 1/4.
    eps_hat : float
        Accuracy of every squaring step.

    """

    degrees: NDArray[np.float64]
    walks: list[NormalizedWalk]
    alpha: float
    eps_hat: float

    @property
    def d(self) -> int:
        return len(self.walks) - 1

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def kernel(self) -> NDArray[np.float64]:
        return self.walks[0].kernel

    def lazy(self, level: int) -> SparseGraph:
        return self.walks[level].lazy(self.alpha)

    def nnz(self) -> list[int]:
        return [walk.walk.nnz for walk in self.walks]


def _check_kernel(walk: NormalizedWalk, level: int) -> None:
    kernel = walk.kernel
    drift = float(
        max(
            np.abs(walk.walk.matvec(kernel) - kernel).max(),
            np.abs(walk.walk.rmatvec(kernel) - kernel).max(),
        )
    )
    if drift > KERNEL_DRIFT_TOL:
        raise ChainKernelDriftError(
            f"Walk {level} moves the kernel vector by {drift:.3e}",
            level=level,
            drift=drift,
        )


def build_chain(
    laplacian: DirectedLaplacian,
    d: int,
    alpha: float,
    eps: float,
    p: float,
    seed: int,
    *,
    first_eps: float = 1 / 20,
    sampling: SamplingConfig = SAMPLING_DEFAULT,
    decomposition: DecompositionConfig = DECOMPOSITION_DEFAULT,
    event_bus: EventBus | None = None,
) -> SquareChain:
    """
    Build a square-sparsifier chain of length d.

    W_0 is the normalized walk of sparsify_eulerian(L, p / (d + 1), first_eps);
    W_{i+1} = D^{-1/2} W~ D^{-1/2} where W~ sparsifies the square of
    D^{1/2} W_i^(alpha) D^{1/2} with accuracy eps.

    Parameters
    ----------
    laplacian : DirectedLaplacian
        Eulerian Laplacian of a strongly connected graph.
    d : int
        Chain length, nonnegative.
    alpha : float
        Laziness; must be 1/4.
    eps : float
        Accuracy of the squaring steps.
    p : float
        Failure probability, split evenly over the d + 1 levels.
    seed : int
        Seed; each level derives a child seed.
    first_eps : float, optional
        Accuracy of the first level. By default 1/20.
    sampling : SamplingConfig, optional
    decomposition : DecompositionConfig, optional
    event_bus : EventBus, optional
        Receives a ChainLevelEvent per level plus sparsifier events.

    Returns
    -------
    SquareChain

    Raises
    ------
    ChainKernelDriftError
        If a walk no longer fixes D^{1/2} 1 within 1e-8.

    """
    if alpha != CHAIN_ALPHA:
        raise ValueError(f"Chain laziness must be {CHAIN_ALPHA}, got {alpha}")
    if d < 0:
        raise ValueError(f"Chain length must be nonnegative, got {d}")
    if not laplacian.eulerian:
        raise NotEulerianError("A square chain needs an Eulerian Laplacian")
    require_strongly_connected(laplacian)
    level_p = p / (d + 1)
    first = sparsify_eulerian(
        laplacian,
        level_p,
        first_eps,
        child_seed(seed, 0),
        sampling=sampling,
        decomposition=decomposition,
        event_bus=event_bus,
    )
    degrees = np.array(laplacian.out_degrees)
    walks = [NormalizedWalk(degrees, normalize(first).walk)]
    _check_kernel(walks[0], 0)
    publish(
        event_bus,
        ChainLevelEvent(type="chain_level", level=0, nnz=walks[0].walk.nnz),
    )
    sqrt_degrees = walks[0].sqrt_degrees
    for level in range(d):
        balanced = walks[level].unnormalized(walks[level].lazy(alpha))
        squared = sparsify_square(
            balanced,
            level_p,
            eps,
            child_seed(seed, 1, level),
            sampling=sampling,
            decomposition=decomposition,
            event_bus=event_bus,
        )
        walk = NormalizedWalk(
            degrees, squared.scale_rows(1 / sqrt_degrees).scale_cols(1 / sqrt_degrees)
        )
        _check_kernel(walk, level + 1)
        walks.append(walk)
        logger.debug("Chain level %d: nnz = %d", level + 1, walk.walk.nnz)
        publish(
            event_bus,
            ChainLevelEvent(type="chain_level", level=level + 1, nnz=walk.walk.nnz),
        )
    return SquareChain(degrees=degrees, walks=walks, alpha=alpha, eps_hat=eps)
