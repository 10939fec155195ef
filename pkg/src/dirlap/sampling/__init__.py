__all__ = [
    "POLICY_DEFAULT",
    "EntryDistribution",
    "ExceptionRule",
    "OutcomeRule",
    "PatchMatrix",
    "ResampleContext",
    "ResamplePolicy",
    "SampleOutcome",
    "build_distribution",
    "default_policy",
    "exceeds_tolerance",
    "full_sample_multiplier",
    "normalized_error",
    "patch_to_degrees",
    "rebalance",
    "sample_average",
    "sample_independent",
    "sparsify_subgraph",
]

from .distribution import (
    EntryDistribution,
    build_distribution,
    sample_average,
    sample_independent,
)
from .patching import PatchMatrix, patch_to_degrees, rebalance
from .policy import POLICY_DEFAULT, ResampleContext, ResamplePolicy, default_policy
from .rules import ExceptionRule, OutcomeRule, SampleOutcome, exceeds_tolerance
from .subgraph import full_sample_multiplier, normalized_error, sparsify_subgraph
