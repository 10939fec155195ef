"""
Tunable constants.

Defaults are calibrated for desk-scale problems (hundreds of vertices).
The worst-case constants of the underlying algorithms are available through
`SolverConfig.theoretical()`; they are correct but far too slow to be useful.
"""

import math

from dataclasses import dataclass
from typing import Literal, TypeAlias

SamplingScheme: TypeAlias = Literal["independent", "replacement"]


@dataclass(frozen=True, slots=True)
class SamplingConfig:
    """
    Entrywise sampling parameters.

    Parameters
    ----------
    c_sample : float
        Oversampling constant in k = c_sample * s * eps^-2 * ln(s/p).
    scheme : {"independent", "replacement"}
        "independent" keeps entry (i, j) with probability min(1, k p_ij);
        "replacement" averages k draws with replacement.
    verify : bool
        Check every sample against its input and resample when the error
        exceeds eps. Eulerian sparsification also searches for the sparsest
        sample that passes.
    verify_iterations : int
        Power iterations used by the verification.
    max_resamples : int
        Resamples allowed before giving up.
    chunk_size : int
        Draws per independently seeded chunk.
    search_steps : int
        Bisection steps of the Eulerian sparsity search.
    dense_verify_limit : int
        Up to this many vertices, Eulerian samples are checked exactly with
        dense eigenpairs instead of the power method.
    certified_pieces : bool
        Sample every decomposition piece at eps * alpha / (2 beta) instead of
        eps. The certified alpha makes this an identity at desk scale.

    """

    c_sample: float = 16.0
    scheme: SamplingScheme = "independent"
    verify: bool = True
    verify_iterations: int = 60
    max_resamples: int = 3
    chunk_size: int = 1 << 16
    search_steps: int = 10
    dense_verify_limit: int = 256
    certified_pieces: bool = False

    def sample_count(self, support: int, eps: float, p: float) -> int:
        """Number of draws for `support` nonzero rows plus columns."""
        return math.ceil(
            self.c_sample * support * math.log(support / p) / (eps * eps)
        )


@dataclass(frozen=True, slots=True)
class DecompositionConfig:
    """
    Expander decomposition parameters.

    Parameters
    ----------
    c_phi : float
        Default target conductance is c_phi / ln(n + 1)^2.
    trials : int
        Power-iteration restarts per sweep.
    iterations : int
        Power iterations per restart.
    tolerance : float
        Rayleigh quotient stagnation threshold.
    progress_fraction : float
        Fraction of remaining edges a round is expected to certify.
    max_workers : int | None
        Threads used for independent weight buckets. None reads DIRLAP_THREADS.

    """

    c_phi: float = 1 / 8
    trials: int = 4
    iterations: int = 200
    tolerance: float = 1e-6
    progress_fraction: float = 0.25
    max_workers: int | None = None

    def phi_target(self, n: int) -> float:
        return self.c_phi / math.log(n + 1) ** 2


@dataclass(frozen=True, slots=True)
class SolverConfig:
    """
    Eulerian solver parameters.

    With the default values:

    * chain length d = ceil(depth_factor * ln(1 / lambda_hat))
    * chain error eps_hat = exp(-error_decay * sqrt(d ln d)) / inner_denominator
    * outer iterations ceil(outer_factor * ln(1 / eps))
    * base case: step base_step (or ell/4 when None) and
      ceil(base_iteration_factor / ell**base_iteration_power * ln(1 / eps))
      iterations, ell = min(ell_cap, growth**d * 0.9 * lambda_hat)

    Parameters
    ----------
    depth_factor : float
    error_decay : float
    inner_denominator : float
    outer_factor : float
    base_step : float | None
    base_iteration_factor : float
    base_iteration_power : float
    ell_cap : float
    growth : float
    measure_base_gap : bool
        Also estimate the gap of the last chain level and use it when larger.
    lambda_iterations : int
        Inverse power iterations for the smallest nonzero eigenvalue.
    c_budget : float
        Operator applications allowed: c_budget * n * 2^(3 sqrt(d ln d)).
    sparsify_eps : float
        Accuracy of the first chain level.
    log_base : str
        Recorded in reports; logarithms are natural.

    """

    depth_factor: float = 3.0
    error_decay: float = 1.0
    inner_denominator: float = 30.0
    outer_factor: float = 2.0
    base_step: float | None = 0.5
    base_iteration_factor: float = 4.0
    base_iteration_power: float = 1.0
    ell_cap: float = 1.0
    growth: float = 1.125
    measure_base_gap: bool = True
    lambda_iterations: int = 40
    c_budget: float = 1e4
    sparsify_eps: float = 1 / 20
    log_base: str = "e"

    @classmethod
    def theoretical(cls) -> "SolverConfig":
        """Constants exactly as stated by the algorithm's analysis."""
        return cls(
            depth_factor=6.0,
            error_decay=5.0,
            inner_denominator=30.0,
            outer_factor=10.0,
            base_step=None,
            base_iteration_factor=8.0,
            base_iteration_power=2.0,
            ell_cap=0.25,
            measure_base_gap=False,
        )


@dataclass(frozen=True, slots=True)
class ApplicationConfig:
    """
    Parameters of the reductions built on the Eulerian solver.

    Parameters
    ----------
    scale_r : float | None
        Scale separation of the condition-number reduction.
        None means max(1e6, n^3).
    c_pert : float
        Diagonal perturbation delta = eps * w_min / (c_pert * n^3).
    c_stat : float
        Stationary inner accuracy c_stat * (alpha / n)^stationary_power.
    stationary_power : float
    min_inner_eps : float
        Inner accuracies are never requested below this value.
    refine_steps : int
        Refinement steps of the full solver.
    scaling_tolerance : float
        Relative mass of the Eulerian-scaling repair patch before a warning.
    stationary_alpha : float
        Restart parameter of the stationary computations behind Eulerian
        scaling, the full solver and PageRank.
    stationary_tolerance : float
        Stationary rounds continue past ceil(3 ln(1 / alpha)) until
        ||L x||_1 / ||D x||_1 is at most this value.
    max_stationary_rounds : int
        Hard limit on stationary rounds.

    """

    scale_r: float | None = None
    c_pert: float = 10.0
    c_stat: float = 1e-3
    stationary_power: float = 5.0
    min_inner_eps: float = 1e-14
    refine_steps: int = 10
    scaling_tolerance: float = 1e-6
    stationary_alpha: float = 0.01
    stationary_tolerance: float = 1e-11
    max_stationary_rounds: int = 200

    def scale_for(self, n: int) -> float:
        if self.scale_r is not None:
            return self.scale_r
        return max(1e6, float(n) ** 3)


SAMPLING_DEFAULT = SamplingConfig()
DECOMPOSITION_DEFAULT = DecompositionConfig()
SOLVER_DEFAULT = SolverConfig()
APPLICATION_DEFAULT = ApplicationConfig()
