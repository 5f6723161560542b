"""The two synthetic benchmark universes and their world generators.

The dating universe: one boy, one girl.  The boy is lonely 30% of the time,
the girl is exciting 60% of the time; the boy likes the girl iff he is
lonely or she is exciting; the girl likes the boy 40% of the time; they
date iff they like each other.

The chain universe: one agent and unary predicates a0..aN where a0 is a fair
coin and every later stage copies the previous one exactly.
"""

from __future__ import annotations

import random

from .calculus import Constant, Proposition, Variable
from .factors import AnalyticFactors
from .implication import (
    ConjoinedImplicationLink,
    KnowledgeBase,
    PredicateImplicationLink,
    Predicate,
    RoleSetMapping,
    unary_link,
)

World = dict[str, int]

JACK = Constant("jack1", "jack")
JILL = Constant("jill1", "jill")
X_JACK = Variable("jack")
X_JILL = Variable("jill")


def dating_propositions() -> dict[str, Proposition]:
    """The five grounded propositions, under stable short names."""
    return {
        "lonely": Proposition("lonely", {"subj": JACK}),
        "exciting": Proposition("exciting", {"subj": JILL}),
        "like_bg": Proposition("like", {"subj": JACK, "dobj": JILL}),
        "like_gb": Proposition("like", {"subj": JILL, "dobj": JACK}),
        "date": Proposition("date", {"subj": JACK, "dobj": JILL}),
    }


def dating_knowledge_base() -> KnowledgeBase:
    kb = KnowledgeBase(entities={"jack1": "jack", "jill1": "jill"})
    like_bg = Predicate("like", {"subj": X_JACK, "dobj": X_JILL})
    like_gb = Predicate("like", {"subj": X_JILL, "dobj": X_JACK})
    date = Predicate("date", {"subj": X_JACK, "dobj": X_JILL})

    # Two independent causes of liking: each its own single-premise link,
    # so the OR factor of like(jack, jill) sees two singleton groups.
    kb.add_link(
        unary_link(
            Predicate("lonely", {"subj": X_JACK}), like_bg, {"subj": "subj"}
        )
    )
    kb.add_link(
        unary_link(
            Predicate("exciting", {"subj": X_JILL}), like_bg, {"subj": "dobj"}
        )
    )
    # Dating needs mutual liking: one conjoined link, two premises, where
    # the second premise swaps the roles.
    kb.add_link(
        ConjoinedImplicationLink(
            [
                PredicateImplicationLink(
                    like_bg, date, RoleSetMapping({"subj": "subj", "dobj": "dobj"})
                ),
                PredicateImplicationLink(
                    like_gb, date, RoleSetMapping({"subj": "dobj", "dobj": "subj"})
                ),
            ]
        )
    )
    return kb


def dating_analytic_factors() -> AnalyticFactors:
    p = dating_propositions()
    return AnalyticFactors(
        priors={
            p["lonely"].key(): 0.3,
            p["exciting"].key(): 0.6,
            p["like_gb"].key(): 0.4,
        }
    )


def generate_dating_world(seed: int) -> World:
    """One fully observed sample of the dating universe."""
    rng = random.Random(seed)
    p = dating_propositions()
    lonely = int(rng.random() < 0.3)
    exciting = int(rng.random() < 0.6)
    like_gb = int(rng.random() < 0.4)
    like_bg = lonely | exciting
    date = like_bg & like_gb
    return {
        p["lonely"].key(): lonely,
        p["exciting"].key(): exciting,
        p["like_bg"].key(): like_bg,
        p["like_gb"].key(): like_gb,
        p["date"].key(): date,
    }


def chain_propositions(n: int) -> list[Proposition]:
    """Grounded a0..aN for the single chain agent."""
    if n < 1:
        raise ValueError("chain length must be at least 1")
    return [Proposition(f"alpha{i}", {"subj": JACK}) for i in range(n + 1)]


def chain_knowledge_base(n: int) -> KnowledgeBase:
    kb = KnowledgeBase(entities={"jack1": "jack"})
    for i in range(1, n + 1):
        kb.add_link(
            unary_link(
                Predicate(f"alpha{i - 1}", {"subj": X_JACK}),
                Predicate(f"alpha{i}", {"subj": X_JACK}),
                {"subj": "subj"},
            )
        )
    return kb


def chain_analytic_factors(n: int) -> AnalyticFactors:
    return AnalyticFactors(priors={chain_propositions(n)[0].key(): 0.5})


def generate_chain_world(seed: int, n: int) -> World:
    """One chain sample: a0 is a fair coin, every stage copies it."""
    rng = random.Random(seed)
    first = int(rng.random() < 0.5)
    return {p.key(): first for p in chain_propositions(n)}
