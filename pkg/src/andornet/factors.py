"""Conditional factor models for the two node layers.

Group nodes are always deterministic AND gates.  Proposition nodes take one
of three OR-flavored conditionals: a deterministic gate, a learned
linear-exponential model over (value, link, group-value) features, or a
noisy-or whose forward probability admits a single linear pass.

Potentials for the learned model are combined in log space and normalized
with max subtraction, since raw exp of a weight sum overflows long before
the weights stop being meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import NumericError
from .implication import Feature, prior_link_id

_BIT = (0, 1)


def _check_bit(name, value):
    if value not in _BIT:
        raise ValueError(f"{name} must be 0 or 1, got {value!r}")


def and_potential(g_value: int, parent_values: Sequence[int]) -> int:
    """1 iff g_value equals the conjunction of its parents."""
    if not parent_values:
        raise ValueError("and gate needs at least one parent")
    _check_bit("g_value", g_value)
    for v in parent_values:
        _check_bit("parent value", v)
    return 1 if g_value == min(parent_values) else 0


def or_potential_deterministic(p_value: int, group_values: Sequence[int]) -> int:
    """1 iff p_value equals the disjunction of its input groups."""
    if not group_values:
        raise ValueError("or gate needs at least one input group")
    _check_bit("p_value", p_value)
    for v in group_values:
        _check_bit("group value", v)
    return 1 if p_value == max(group_values) else 0


class WeightVector:
    """Feature -> weight map; absent features weigh zero."""

    def __init__(self, weights: Mapping[Feature, float] | None = None):
        self._w: dict[Feature, float] = dict(weights or {})

    def get(self, feature: Feature) -> float:
        return self._w.get(feature, 0.0)

    def add(self, feature: Feature, delta: float):
        value = self._w.get(feature, 0.0) + delta
        if not math.isfinite(value):
            raise NumericError(f"weight for {feature.key()} became non-finite")
        self._w[feature] = value

    def items(self):
        return self._w.items()

    def __len__(self):
        return len(self._w)

    def __eq__(self, other):
        return isinstance(other, WeightVector) and self._w == other._w

    def copy(self) -> "WeightVector":
        return WeightVector(self._w)

    def to_string_dict(self) -> dict[str, float]:
        return {f.key(): w for f, w in sorted(self._w.items(), key=lambda kv: kv[0].key())}

    @classmethod
    def from_string_dict(cls, data: Mapping[str, float]) -> "WeightVector":
        return cls({Feature.parse(k): float(v) for k, v in data.items()})


def or_probability_learned(
    p_value: int, features: Iterable[Feature], weights: WeightVector
) -> float:
    """Normalized linear-exponential conditional for one conclusion value.

    ``features`` must hold the features for BOTH candidate conclusion values
    under one fixed group assignment; the potential exp(sum of weights) for
    each value is normalized so the two probabilities sum to one.
    """
    _check_bit("p_value", p_value)
    score = [0.0, 0.0]
    for f in features:
        score[f.conclusion_value] += weights.get(f)
    if not (math.isfinite(score[0]) and math.isfinite(score[1])):
        raise NumericError("non-finite weight sum in or factor")
    top = max(score)
    e0 = math.exp(score[0] - top)
    e1 = math.exp(score[1] - top)
    return (e1 if p_value == 1 else e0) / (e0 + e1)


def logistic_or_weights(
    input_link_ids: Sequence[str],
    bias_link_id: str,
    bias: float = -0.5,
    unit_weight: float = 1.0,
) -> WeightVector:
    """Weights that make the learned OR compute sigmoid(bias + w*sum(inputs)).

    With bias -0.5 and unit weights the factor classifies exactly like a
    boolean OR of its inputs, which is the construction demonstrating that
    a log-linear factor can stand in for disjunction at any width.
    """
    w = WeightVector()
    w.add(Feature(1, bias_link_id, 1), bias)
    for link_id in input_link_ids:
        w.add(Feature(1, link_id, 1), unit_weight)
    return w


@dataclass(frozen=True)
class NoisyOrParams:
    """Per-cause activation probabilities plus a leak term.

    activation[i] is the probability that cause i alone turns the effect on;
    leak is the probability the effect turns on with no cause active.
    """

    activation: tuple[float, ...]
    leak: float = 0.0

    def __post_init__(self):
        for q in (*self.activation, self.leak):
            if not (0.0 <= q <= 1.0):
                raise ValueError(f"noisy-or parameter {q!r} outside [0, 1]")


def noisy_or_probability(
    params: NoisyOrParams, parent_true_probs: Sequence[float]
) -> float:
    """P(effect on) for independent causes, in one linear pass."""
    if len(parent_true_probs) != len(params.activation):
        raise ValueError(
            f"{len(parent_true_probs)} parent probabilities for "
            f"{len(params.activation)} causes"
        )
    off = 1.0 - params.leak
    for q, p in zip(params.activation, parent_true_probs):
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"parent probability {p!r} outside [0, 1]")
        off *= 1.0 - q * p
    return 1.0 - off


class AnalyticFactors:
    """Closed-form factors: fixed root priors and (noisy-)or conditionals.

    With no explicit parameters an OR node gets activation 1 and leak 0 per
    cause, i.e. the deterministic gate; this is the analytic stand-in used
    when a universe's rules are known exactly.
    """

    def __init__(
        self,
        priors: Mapping[str, float],
        or_params: Mapping[str, NoisyOrParams] | None = None,
    ):
        self.priors = dict(priors)
        self.or_params = dict(or_params or {})

    def _or_params_for(self, graph, node_id: str) -> NoisyOrParams:
        params = self.or_params.get(node_id)
        if params is None:
            width = len(graph.factors_of[node_id])
            params = NoisyOrParams(activation=(1.0,) * width)
        return params

    def conditional(
        self, graph, node_id: str, value: int, parent_values: Mapping[str, int]
    ) -> float:
        node = graph.nodes[node_id]
        if node.is_group():
            members = [parent_values[m] for m in graph.parents(node_id)]
            return float(and_potential(value, members))
        factors = graph.factors_of[node_id]
        if not factors:
            prior = self.priors.get(node_id)
            if prior is None:
                raise KeyError(f"no analytic prior declared for root {node_id}")
            return prior if value == 1 else 1.0 - prior
        params = self._or_params_for(graph, node_id)
        inputs = [float(parent_values[gid]) for _, gid in factors]
        p_true = noisy_or_probability(params, inputs)
        return p_true if value == 1 else 1.0 - p_true

    def forward_params(self, graph, node_id: str) -> NoisyOrParams | None:
        """Noisy-or params for the linear-time forward pass, when valid.

        The linear formula assumes each input group is a distinct parent;
        a duplicated parent would square a message that should stay linear.
        """
        node = graph.nodes[node_id]
        if node.is_group():
            return None
        factors = graph.factors_of[node_id]
        if not factors or len(factors) != len(graph.parents(node_id)):
            return None
        return self._or_params_for(graph, node_id)


class LearnedFactors:
    """Linear-exponential OR conditionals driven by trained weights.

    Roots (empty factor context) read their prior from an always-on bias
    feature keyed by the proposition's typed pattern.
    """

    def __init__(self, weights: WeightVector):
        self.weights = weights

    def _active_pairs(self, graph, node_id: str) -> list[tuple[str, str]]:
        factors = graph.factors_of[node_id]
        if factors:
            return list(factors)
        return [(prior_link_id(graph.nodes[node_id].proposition), None)]

    def conditional(
        self, graph, node_id: str, value: int, parent_values: Mapping[str, int]
    ) -> float:
        node = graph.nodes[node_id]
        if node.is_group():
            members = [parent_values[m] for m in graph.parents(node_id)]
            return float(and_potential(value, members))
        features = []
        for link_id, group_id in self._active_pairs(graph, node_id):
            g_val = 1 if group_id is None else parent_values[group_id]
            features.append(Feature(0, link_id, g_val))
            features.append(Feature(1, link_id, g_val))
        return or_probability_learned(value, features, self.weights)

    def forward_params(self, graph, node_id: str):
        return None


def build_conditional_tables(graph, provider) -> dict[str, list[tuple[float, float]]]:
    """Precompute P(z=v | parent assignment) for every node.

    table[node][bits] = (P(z=0|..), P(z=1|..)) where bit j of ``bits`` is the
    value of graph.parents(node)[j].  Roots have the single entry bits=0.
    """
    tables = {}
    for node_id in graph.topo_order:
        parents = graph.parents(node_id)
        entries = []
        for bits in range(1 << len(parents)):
            assignment = {a: (bits >> j) & 1 for j, a in enumerate(parents)}
            p0 = provider.conditional(graph, node_id, 0, assignment)
            p1 = provider.conditional(graph, node_id, 1, assignment)
            entries.append((p0, p1))
        tables[node_id] = entries
    return tables
