from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal

if TYPE_CHECKING:
    from dirlap.reports import SolveReport


@dataclass
class Event:
    """Base class for all events."""

    type: Literal[
        "sample",
        "resample",
        "piece_certified",
        "product_sparsified",
        "chain_level",
        "solve",
        "stationary_round",
        "scale_level",
    ]


@dataclass
class SampleEvent(Event):
    """Emitted after an entrywise sample has been drawn and patched."""

    type: Literal["sample"]
    attempt: int
    draws: int
    nnz_in: int
    nnz_out: int
    norm: float | None = None


@dataclass
class ResampleEvent(Event):
    """Emitted immediately before a sample is redrawn."""

    type: Literal["resample"]
    attempt: int
    norm: float | None = None
    exception: Exception | None = None


@dataclass
class PieceCertifiedEvent(Event):
    """Emitted when a decomposition piece passes the sweep certificate."""

    type: Literal["piece_certified"]
    bucket: int
    round: int
    support: int
    nnz: int
    phi: float


@dataclass
class ProductSparsifiedEvent(Event):
    """
    Emitted for every per-vertex product Laplacian of a square.

    `nnz` is the number of entries materialized for that vertex.
    """

    type: Literal["product_sparsified"]
    vertex: int
    support: int
    exact: bool
    nnz: int


@dataclass
class ChainLevelEvent(Event):
    """Emitted when a level of a square-sparsifier chain is built."""

    type: Literal["chain_level"]
    level: int
    nnz: int


@dataclass
class SolveEvent(Event):
    """Emitted when a top-level Eulerian solve finishes."""

    type: Literal["solve"]
    report: "SolveReport"


@dataclass
class StationaryRoundEvent(Event):
    """Emitted after every round of the stationary computation."""

    type: Literal["stationary_round"]
    round: int
    residual: float


@dataclass
class ScaleLevelEvent(Event):
    """Emitted for every contracted system of the condition-number reduction."""

    type: Literal["scale_level"]
    level: int
    threshold: float
    components: int
    regularizer: float
    # row-major (source, target, weight) of the contracted graph
    edges: list[tuple[int, int, float]] = field(default_factory=list)
