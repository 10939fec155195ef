"""
Versioned run reports.

Every report is a dataclass serialized with `to_json`; `schema_version` is
bumped whenever a field is added, renamed or removed.
"""

from dataclasses import asdict, dataclass, field
from typing import Any

from dirlap.utils import json_dumps

SCHEMA_VERSION = 1


@dataclass
class SparsifyReport:
    """Outcome of `sparsify` and `sparsify-square`."""

    command: str
    seed: int
    eps: float
    p: float
    nnz_in: int
    nnz_out: int
    samples: int
    resamples: int
    max_degree_error: float
    parameters: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


@dataclass
class DecompositionManifest:
    """Per-piece manifest of a decomposition."""

    seed: int
    n: int
    nnz: int
    phi_target: float
    alpha: float
    beta: float
    buckets: int
    rounds: int
    total_support: int
    pieces: list[dict[str, Any]] = field(default_factory=list)
    parameters: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


@dataclass
class SolveReport:
    """
    Summary of an Eulerian solve.

    Attributes
    ----------
    eps : float
        Requested accuracy.
    seed : int
        Seed of the chain.
    lambda_hat : float
        Lower bound on the smallest nonzero eigenvalue of the normalized
        symmetrization.
    depth : int
        Chain length d.
    eps_hat : float
        Accuracy of the chain levels.
    applications : int
        Primitive sparse products used by the solve.
    wall_time : float
        Seconds, chain construction included.
    residual : float
        ||L x - b||_2 / ||b||_2.
    projected : bool
        Whether b had to be projected orthogonally to the all-ones vector.
    chain_nnz : list[int]
        Nonzeros of every chain level.
    parameters : dict
        Configuration ledger.

    """

    eps: float
    seed: int
    lambda_hat: float
    depth: int
    eps_hat: float
    applications: int
    wall_time: float
    residual: float
    projected: bool
    chain_nnz: list[int] = field(default_factory=list)
    parameters: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


@dataclass
class StationaryReport:
    """Outcome of `stationary`, `pagerank` and the stationary phase of `solve`."""

    alpha: float
    iterations: int
    residual: float
    trace: list[float] = field(default_factory=list)
    parameters: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


@dataclass
class BenchReport:
    """Timings per size and the fitted log-log slope of time against nnz."""

    eps: float
    seed: int
    sizes: list[int]
    runs: list[dict[str, Any]] = field(default_factory=list)
    slope: float | None = None
    schema_version: int = SCHEMA_VERSION


Report = (
    SparsifyReport
    | DecompositionManifest
    | SolveReport
    | StationaryReport
    | BenchReport
)


def to_json(report: Report) -> bytes:
    """Serialize a report to indented JSON."""
    return json_dumps(asdict(report))
