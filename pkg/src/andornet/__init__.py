"""Bipartite AND/OR belief network over a key-value predicate calculus.

Quantified implication links compile, per query, into a bipartite graph of
proposition and conjunction-group nodes; OR factors are trained by SGD on
fully observed synthetic worlds and queried with iterative belief
propagation, checked against a brute-force enumeration oracle.
"""

from .calculus import (
    Argument,
    Constant,
    Predicate,
    Proposition,
    PropositionGroup,
    Variable,
    abstractions,
    as_proposition,
    bind,
    canonical_key,
    parse_key,
)
from .factors import (
    AnalyticFactors,
    LearnedFactors,
    NoisyOrParams,
    WeightVector,
    and_potential,
    noisy_or_probability,
    or_potential_deterministic,
    or_probability_learned,
)
from .graph import GraphNode, PropositionGraph, build_graph
from .implication import (
    ConjoinedImplicationLink,
    Feature,
    KnowledgeBase,
    PredicateImplicationLink,
    PropositionFactor,
    RoleSetMapping,
    backfill,
    feature_vector,
    unary_link,
)
from .inference import BeliefState, Trace, TraceRow
from .oracle import exact_marginals
from .training import TrainConfig, mean_nll, sgd_train

__all__ = [
    "AnalyticFactors",
    "Argument",
    "BeliefState",
    "ConjoinedImplicationLink",
    "Constant",
    "Feature",
    "GraphNode",
    "KnowledgeBase",
    "LearnedFactors",
    "NoisyOrParams",
    "Predicate",
    "PredicateImplicationLink",
    "Proposition",
    "PropositionFactor",
    "PropositionGraph",
    "PropositionGroup",
    "RoleSetMapping",
    "Trace",
    "TraceRow",
    "TrainConfig",
    "Variable",
    "WeightVector",
    "abstractions",
    "and_potential",
    "as_proposition",
    "backfill",
    "bind",
    "build_graph",
    "canonical_key",
    "exact_marginals",
    "feature_vector",
    "mean_nll",
    "noisy_or_probability",
    "or_potential_deterministic",
    "or_probability_learned",
    "parse_key",
    "sgd_train",
    "unary_link",
]
