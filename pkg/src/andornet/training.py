"""Stochastic gradient training of the OR-factor weights.

Worlds are fully observed, so every proposition's local factor context and
the values of its cause groups are known outright; each observation yields
one gradient step on the local log-likelihood of the normalized OR model.
AND factors are fixed by definition and never trained.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .calculus import as_proposition, parse_key
from .errors import UngroundedWorldError
from .factors import WeightVector
from .implication import Feature, KnowledgeBase, prior_link_id

World = dict[str, int]


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    example_count: int = 4096
    seed: int = 0
    epochs: int = 1
    averaged: bool = False  # Polyak averaging; off to match plain SGD

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.example_count < 0:
            raise ValueError("example count must be nonnegative")
        if self.epochs < 1:
            raise ValueError("at least one epoch")


def _score(weights: WeightVector, value: int, active: Sequence[tuple[str, int]]) -> float:
    return sum(weights.get(Feature(value, link_id, g)) for link_id, g in active)


def local_log_likelihood(
    weights: WeightVector, observed_value: int, active: Sequence[tuple[str, int]]
) -> float:
    """log P(p = observed | causes) under the normalized OR model.

    ``active`` lists the (link_id, group_value) pairs feeding the factor.
    """
    s0 = _score(weights, 0, active)
    s1 = _score(weights, 1, active)
    top = max(s0, s1)
    log_z = top + math.log(math.exp(s0 - top) + math.exp(s1 - top))
    return (s1 if observed_value == 1 else s0) - log_z


def local_gradient(
    weights: WeightVector, observed_value: int, active: Sequence[tuple[str, int]]
) -> dict[Feature, float]:
    """Exact gradient of local_log_likelihood in the active weights."""
    s0 = _score(weights, 0, active)
    s1 = _score(weights, 1, active)
    top = max(s0, s1)
    e0 = math.exp(s0 - top)
    e1 = math.exp(s1 - top)
    prob = (e0 / (e0 + e1), e1 / (e0 + e1))
    grad: dict[Feature, float] = {}
    for link_id, g in active:
        for value in (0, 1):
            f = Feature(value, link_id, g)
            indicator = 1.0 if value == observed_value else 0.0
            grad[f] = grad.get(f, 0.0) + indicator - prob[value]
    return grad


def _active_pairs_for(
    kb: KnowledgeBase, prop_key: str, world: Mapping[str, int], cache: dict
) -> list[tuple[str, int]]:
    """(link_id, group value) pairs for one observed proposition.

    Group values are conjunctions of observed member values; a member the
    world does not assign makes the world unusable for this knowledge base.
    """
    meta = cache.get(prop_key)
    if meta is None:
        p = as_proposition(parse_key(prop_key))
        context = kb.factor_context(p)
        if context:
            meta = [
                (f.link.link_id, tuple(m.key() for m in f.premise_group.members))
                for f in context
            ]
        else:
            meta = [(prior_link_id(p), ())]
        cache[prop_key] = meta
    pairs = []
    for link_id, member_keys in meta:
        value = 1
        for mk in member_keys:
            if mk not in world:
                raise UngroundedWorldError(
                    f"world is missing {mk}, needed as a cause of {prop_key}"
                )
            value &= world[mk]
        pairs.append((link_id, value))
    return pairs


def sgd_train(
    kb: KnowledgeBase, worlds: Sequence[World], config: TrainConfig
) -> WeightVector:
    """Fixed-rate SGD over the local OR factors, one pass per epoch.

    Weights start at zero.  Updates run in world order, propositions sorted
    by canonical key inside each world, so the result is a pure function of
    (kb, worlds, config).
    """
    weights = WeightVector()
    running = WeightVector() if config.averaged else None
    steps = 0
    cache: dict = {}
    for _ in range(config.epochs):
        for world in worlds:
            for prop_key in sorted(world):
                active = _active_pairs_for(kb, prop_key, world, cache)
                grad = local_gradient(weights, world[prop_key], active)
                for feature, g in grad.items():
                    weights.add(feature, config.learning_rate * g)
                if running is not None:
                    steps += 1
                    for feature, w in weights.items():
                        prev = running.get(feature)
                        running.add(feature, (w - prev) / steps)
    return running if config.averaged else weights


def mean_nll(kb: KnowledgeBase, worlds: Sequence[World], weights: WeightVector) -> float:
    """Mean negative log-likelihood of the local factors over a dataset."""
    total = 0.0
    count = 0
    cache: dict = {}
    for world in worlds:
        for prop_key in sorted(world):
            active = _active_pairs_for(kb, prop_key, world, cache)
            total -= local_log_likelihood(weights, world[prop_key], active)
            count += 1
    return total / count if count else 0.0


def dump_worlds(worlds: Iterable[World], path: str):
    """Audit dump: one JSON object per line, canonical keys to bits."""
    with open(path, "w", encoding="utf-8") as fh:
        for world in worlds:
            fh.write(json.dumps(world, sort_keys=True) + "\n")
