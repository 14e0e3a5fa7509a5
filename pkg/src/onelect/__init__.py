"""Online approval-based committee elections.

Replay irrevocable accept/reject policies over candidate arrival
streams, solve for exactly optimal policies under known priors, run
prior-free and proportionality-guaranteeing rules, audit committees for
justified-representation axioms, and compare everything to the offline
optimum by Monte Carlo simulation.
"""
from .audit import (
    AuditBudgetError,
    AuditReport,
    AuditWitness,
    check_ejr,
    check_jr,
    check_pjr,
)
from .budgeting import (
    GreedyBudgetPolicy,
    OgcaPolicy,
    SgbrPolicy,
    ceil_w,
    harmonic,
    w_inverse,
    water_fill,
)
from .core import (
    FORCED_FULL,
    FORCED_TIGHT,
    AcceptAll,
    Committee,
    Election,
    ElectionFormatError,
    FixedDecisions,
    InternalInvariantError,
    OnlinePolicy,
    RejectAll,
    ReplayResult,
    ReplayState,
    parse_election,
    replay,
    serialize_election,
)
from .dp import (
    ApprovalPrior,
    PolicyTable,
    StateBudgetError,
    TableFormatError,
    TablePolicy,
    UnsupportedPriorError,
    bellman_audit,
    build_cc_table,
    build_mav_table,
    build_thiele_table,
    dump_table,
    load_table,
    reachable_betas,
    thiele_state_estimate,
)
from .secretary import (
    PartitionPlan,
    SecretaryPolicy,
    make_partition,
    observation_length,
)
from .simlab import (
    AdversaryInfeasibleError,
    AdversarySpec,
    AdversaryStream,
    GenSpec,
    SimSummary,
    StressResult,
    TrialRecord,
    adversary_stream,
    crossover_k,
    evaluate,
    must_accept_total,
    sample_election,
    smallest_feasible_n,
    stress,
    truncated_election,
)
from .thiele import (
    EnumerationBudgetError,
    ThieleFunction,
    intersection_counts,
    marginal_gain,
    offline_optimum,
    resolve_thiele,
    score,
)

__all__ = [
    "AcceptAll",
    "AdversaryInfeasibleError",
    "AdversarySpec",
    "AdversaryStream",
    "ApprovalPrior",
    "AuditBudgetError",
    "AuditReport",
    "AuditWitness",
    "Committee",
    "Election",
    "ElectionFormatError",
    "EnumerationBudgetError",
    "FORCED_FULL",
    "FORCED_TIGHT",
    "FixedDecisions",
    "GenSpec",
    "GreedyBudgetPolicy",
    "InternalInvariantError",
    "OgcaPolicy",
    "OnlinePolicy",
    "PartitionPlan",
    "PolicyTable",
    "RejectAll",
    "ReplayResult",
    "ReplayState",
    "SecretaryPolicy",
    "SgbrPolicy",
    "SimSummary",
    "StateBudgetError",
    "StressResult",
    "TableFormatError",
    "TablePolicy",
    "ThieleFunction",
    "TrialRecord",
    "UnsupportedPriorError",
    "adversary_stream",
    "bellman_audit",
    "build_cc_table",
    "build_mav_table",
    "build_thiele_table",
    "ceil_w",
    "check_ejr",
    "check_jr",
    "check_pjr",
    "crossover_k",
    "dump_table",
    "evaluate",
    "harmonic",
    "intersection_counts",
    "load_table",
    "make_partition",
    "marginal_gain",
    "must_accept_total",
    "observation_length",
    "offline_optimum",
    "parse_election",
    "reachable_betas",
    "replay",
    "resolve_thiele",
    "sample_election",
    "score",
    "serialize_election",
    "smallest_feasible_n",
    "stress",
    "thiele_state_estimate",
    "truncated_election",
    "w_inverse",
    "water_fill",
]
