import logging
import math

from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from numpy.typing import NDArray
from scipy.sparse.linalg import splu

from dirlap.config import SAMPLING_DEFAULT, SamplingConfig
from dirlap.core import DirectedLaplacian, symmetrization
from dirlap.utils import make_rng

logger = logging.getLogger(__name__)

KERNEL_RTOL = 1e-12


def _grounded_solver(
    undirected: sp.csr_array,
) -> Callable[[NDArray[np.float64]], NDArray[np.float64]]:
    """U^+ b for a connected undirected Laplacian U, by grounding the last vertex."""
    grounded = sp.csc_array(undirected[:-1, :-1])
    grounded.indices = grounded.indices.astype(np.int32)
    grounded.indptr = grounded.indptr.astype(np.int32)
    factor = splu(grounded)

    def solve(b: NDArray[np.float64]) -> NDArray[np.float64]:
        x = np.zeros_like(b)
        x[:-1] = factor.solve(b[:-1] - b.mean())
        return x - x.mean()

    return solve


class ApproximationCheck:
    """
    Measures ||U^{+/2} (L~ - L) U^{+/2}||_2 against a fixed Laplacian L.

    U is the symmetrization of L, which must be Eulerian and strongly
    connected. Up to `config.dense_verify_limit` vertices the norm is exact,
    from the eigenpairs of U. Larger graphs use the power method on
    U^+ (L~ - L)^T U^+ (L~ - L) with a sparse factorization of U, which gives
    a lower bound converging to the norm.

    Parameters
    ----------
    reference : DirectedLaplacian
        L.
    config : SamplingConfig, optional
        `dense_verify_limit` and `verify_iterations` are used.
    seed : int, default 0
        Start vector of the power method.

    """

    __slots__ = ("reference", "iterations", "seed", "_basis", "_solve", "_undirected")

    reference: DirectedLaplacian
    iterations: int
    seed: int

    def __init__(
        self,
        reference: DirectedLaplacian,
        config: SamplingConfig = SAMPLING_DEFAULT,
        seed: int = 0,
    ) -> None:
        self.reference = reference
        self.iterations = config.verify_iterations
        self.seed = seed
        undirected = symmetrization(reference).csr
        self._basis: NDArray[np.float64] | None = None
        self._solve: Callable[[NDArray[np.float64]], NDArray[np.float64]] | None = None
        self._undirected = undirected
        if reference.n <= config.dense_verify_limit:
            values, vectors = scipy.linalg.eigh(undirected.toarray())
            image = values > KERNEL_RTOL * max(float(values.max()), 1e-300)
            self._basis = vectors[:, image] / np.sqrt(values[image])
        else:
            self._solve = _grounded_solver(undirected)

    def __call__(self, approximation: DirectedLaplacian) -> float:
        difference = sp.csr_array(approximation.matrix - self.reference.matrix)
        if self._basis is not None:
            projected = self._basis.T @ (difference @ self._basis)
            return float(np.linalg.norm(projected, 2))
        return self._power(difference)

    def _power(self, difference: sp.csr_array) -> float:
        assert self._solve is not None
        solve = self._solve
        vector = solve(make_rng(self.seed).standard_normal(self.reference.n))
        value = 0.0
        for _ in range(self.iterations):
            energy = float(vector @ (self._undirected @ vector))
            if energy <= 0:
                return 0.0
            image = difference @ vector
            potentials = solve(image)
            value = float(image @ potentials) / energy
            vector = solve(difference.T @ potentials)
            norm = float(np.linalg.norm(vector))
            if norm == 0:
                return 0.0
            vector /= norm
        return math.sqrt(max(value, 0.0))


def approximation_error(
    reference: DirectedLaplacian,
    approximation: DirectedLaplacian,
    config: SamplingConfig = SAMPLING_DEFAULT,
    seed: int = 0,
) -> float:
    """One-off ||U^{+/2} (L~ - L) U^{+/2}||_2, see `ApproximationCheck`."""
    return ApproximationCheck(reference, config, seed)(approximation)
