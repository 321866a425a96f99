"""Sublinear-approximation toolkit for Nash social welfare under XOS valuations.

The public surface re-exports the domain types and operations from the
submodules; see the README for a tour. Everything is deterministic given
explicit seeds.
"""

from .capped_welfare import (
    CandidateSet,
    IterationRecord,
    WelfareState,
    WelfareWitness,
    candidate_set,
    capped_social_welfare,
    compute_prices,
)
from .exact import (
    AgentClassification,
    ConcentrationResult,
    EnumerationBudgetError,
    brute_force_capped_sw,
    brute_force_demand,
    brute_force_nsw,
    classify_agents,
    concentration_experiment,
    gstar_from_allocation,
    subset_value_table,
)
from .gadgets import (
    Equicovering,
    GapReport,
    GapRow,
    MultiDisjointnessInstance,
    VerificationResult,
    build_equicovering,
    build_verified_equicovering,
    coverage_bound,
    gap_report,
    random_equipartition,
    reduce_multidisjointness,
    verify_equicovering,
)
from .instances import (
    ParseError,
    emit_instance,
    emit_report,
    generate,
    instance_digest,
    p1p2_witness_bundle,
    parse_instance,
    parse_instance_file,
    parse_report,
)
from .matching import (
    MatchingResult,
    max_product_matching,
    repeated_matchings,
    reserve_rounds,
    verify_matchhigh,
)
from .moving_knife import (
    PrunedSupport,
    discrete_moving_knife,
    prune_small,
    pruned_supports,
)
from .numerics import EPS_NUM, ge_thresh, le_thresh, new_rng
from .solver import SolveTrace, nsw, rematch_bound_check, solve
from .valuations import (
    AdditiveFunction,
    Allocation,
    Bundle,
    CappedView,
    Instance,
    PriceVector,
    XOSValuation,
    capped_value,
    demand_query,
    value,
    xos_query,
)

__version__ = "0.1.0"

__all__ = [
    "AdditiveFunction",
    "AgentClassification",
    "Allocation",
    "Bundle",
    "CandidateSet",
    "CappedView",
    "ConcentrationResult",
    "EnumerationBudgetError",
    "EPS_NUM",
    "Equicovering",
    "GapReport",
    "GapRow",
    "Instance",
    "IterationRecord",
    "MatchingResult",
    "MultiDisjointnessInstance",
    "ParseError",
    "PriceVector",
    "PrunedSupport",
    "SolveTrace",
    "VerificationResult",
    "WelfareState",
    "WelfareWitness",
    "XOSValuation",
    "brute_force_capped_sw",
    "brute_force_demand",
    "brute_force_nsw",
    "build_equicovering",
    "build_verified_equicovering",
    "candidate_set",
    "capped_social_welfare",
    "capped_value",
    "classify_agents",
    "compute_prices",
    "concentration_experiment",
    "coverage_bound",
    "demand_query",
    "discrete_moving_knife",
    "emit_instance",
    "emit_report",
    "gap_report",
    "ge_thresh",
    "generate",
    "gstar_from_allocation",
    "instance_digest",
    "le_thresh",
    "max_product_matching",
    "new_rng",
    "nsw",
    "p1p2_witness_bundle",
    "parse_instance",
    "parse_instance_file",
    "parse_report",
    "prune_small",
    "pruned_supports",
    "random_equipartition",
    "reduce_multidisjointness",
    "rematch_bound_check",
    "repeated_matchings",
    "reserve_rounds",
    "solve",
    "subset_value_table",
    "value",
    "verify_equicovering",
    "verify_matchhigh",
    "xos_query",
]
