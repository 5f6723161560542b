"""Quantified implication links and the knowledge base that stores them.

A link says: this conjunction of premise predicates supports that conclusion
predicate, with a role-set mapping per premise carrying the conclusion's
arguments backward into premise slots.  Weights are keyed by link identity,
so one link prices every grounding it ever touches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .calculus import (
    Predicate,
    Proposition,
    PropositionGroup,
    Variable,
    abstractions,
    as_proposition,
    bind,
)
from .errors import BackfillMismatchError, LinkValidationError


@dataclass(frozen=True, init=False)
class RoleSetMapping:
    """Injective map premise-role -> conclusion-role."""

    entries: tuple[tuple[str, str], ...]

    def __init__(self, entries: Mapping[str, str]):
        items = tuple(sorted(entries.items()))
        images = [s for _, s in items]
        if len(set(images)) != len(images):
            raise LinkValidationError(f"role mapping {entries!r} is not injective")
        object.__setattr__(self, "entries", items)

    def as_dict(self) -> dict[str, str]:
        return dict(self.entries)

    def key(self) -> str:
        return "{" + ",".join(f"{r}>{s}" for r, s in self.entries) + "}"


@dataclass(frozen=True)
class PredicateImplicationLink:
    """One premise predicate, the shared conclusion, and their role mapping.

    The mapping must cover every open role of the premise; its images must
    be open roles of the conclusion with matching variable types.  A fully
    grounded premise needs (and gets) an empty mapping.
    """

    premise: Predicate
    conclusion: Predicate
    mapping: RoleSetMapping

    def __post_init__(self):
        premise_open = set(self.premise.open_roles)
        conclusion_open = set(self.conclusion.open_roles)
        mapped = self.mapping.as_dict()
        if set(mapped) != premise_open:
            raise LinkValidationError(
                f"mapping {self.mapping.key()} must cover exactly the open "
                f"roles {sorted(premise_open)} of premise {self.premise.key()}"
            )
        if len(premise_open) > len(conclusion_open):
            raise LinkValidationError(
                f"premise {self.premise.key()} has more open roles than "
                f"conclusion {self.conclusion.key()}"
            )
        conclusion_roles = self.conclusion.roles
        premise_roles = self.premise.roles
        for r, s in mapped.items():
            if s not in conclusion_open:
                raise LinkValidationError(
                    f"mapping image {s!r} is not an open role of "
                    f"conclusion {self.conclusion.key()}"
                )
            want = premise_roles[r].type_name
            got = conclusion_roles[s].type_name
            if want != got:
                raise LinkValidationError(
                    f"type mismatch through mapping {r}>{s}: {want!r} vs {got!r}"
                )

    def key(self) -> str:
        return f"{self.premise.key()}{self.mapping.key()}"


@dataclass(frozen=True, init=False)
class ConjoinedImplicationLink:
    """A conjunction of premise links sharing one conclusion predicate."""

    premises: tuple[PredicateImplicationLink, ...]
    link_id: str

    def __init__(self, premises: Iterable[PredicateImplicationLink]):
        premises = tuple(premises)
        if not premises:
            raise LinkValidationError("conjoined link needs at least one premise")
        conclusion_keys = {p.conclusion.key() for p in premises}
        if len(conclusion_keys) != 1:
            raise LinkValidationError(
                f"premises disagree on the conclusion: {sorted(conclusion_keys)}"
            )
        # Identity is order-insensitive: premise clauses are sorted in the id.
        clause_keys = sorted(p.key() for p in premises)
        link_id = "&".join(clause_keys) + "=>" + premises[0].conclusion.key()
        object.__setattr__(self, "premises", premises)
        object.__setattr__(self, "link_id", link_id)

    @property
    def conclusion(self) -> Predicate:
        return self.premises[0].conclusion


def unary_link(
    premise: Predicate, conclusion: Predicate, mapping: Mapping[str, str]
) -> ConjoinedImplicationLink:
    """Convenience constructor for single-premise links."""
    return ConjoinedImplicationLink(
        [PredicateImplicationLink(premise, conclusion, RoleSetMapping(mapping))]
    )


@dataclass(frozen=True)
class PropositionFactor:
    """A grounded cause: (conclusion, link, grounded premise group)."""

    conclusion: Proposition
    link: ConjoinedImplicationLink
    premise_group: PropositionGroup

    def __post_init__(self):
        if len(self.premise_group.members) != len(self.link.premises):
            raise LinkValidationError(
                f"group arity {len(self.premise_group.members)} != "
                f"link premise count {len(self.link.premises)}"
            )


@dataclass(frozen=True)
class Feature:
    """The (conclusion value, link id, group value) triple the OR model scores."""

    conclusion_value: int
    link_id: str
    group_value: int

    def __post_init__(self):
        if self.conclusion_value not in (0, 1) or self.group_value not in (0, 1):
            raise ValueError("feature values must be 0 or 1")

    def key(self) -> str:
        return f"{self.conclusion_value}|{self.link_id}|{self.group_value}"

    @classmethod
    def parse(cls, text: str) -> "Feature":
        head, _, tail = text.partition("|")
        link_id, _, group = tail.rpartition("|")
        return cls(int(head), link_id, int(group))


def prior_link_id(proposition: Proposition) -> str:
    """Identity of the always-on prior feature for a root proposition.

    Keyed by the proposition's fully abstracted pattern so all groundings of
    one typed pattern share a prior; a nullary proposition is its own pattern.
    """
    pattern = Predicate(
        proposition.function_name,
        {
            label: Variable(arg.type_name)
            for label, arg in proposition.role_items
        },
    )
    return f"prior=>{pattern.key()}"


def is_abstraction_of(q: Predicate, p: Proposition) -> bool:
    """True when q arises from p by opening a nonempty subset of roles."""
    if q.function_name != p.function_name or q.role_labels != p.role_labels:
        return False
    p_roles = p.roles
    opened = 0
    for label, arg in q.role_items:
        if isinstance(arg, Variable):
            if arg.type_name != p_roles[label].type_name:
                return False
            opened += 1
        elif arg != p_roles[label]:
            return False
    return opened > 0


def backfill(p: Proposition, link: ConjoinedImplicationLink) -> PropositionGroup:
    """Push p's constants backward through the link's role mappings.

    Produces the unique grounded premise group the link connects to p.
    """
    if not is_abstraction_of(link.conclusion, p):
        raise BackfillMismatchError(
            f"conclusion {link.conclusion.key()} is not an abstraction "
            f"of {p.key()}"
        )
    p_roles = p.roles
    members = []
    for clause in link.premises:
        substitution = {
            r: p_roles[s] for r, s in clause.mapping.entries
        }
        members.append(as_proposition(bind(clause.premise, substitution)))
    return PropositionGroup(members)


def feature_vector(
    p_value: int,
    factors: Iterable[PropositionFactor],
    group_values: Mapping[str, int],
) -> frozenset[Feature]:
    """One feature per factor for the given conclusion value.

    group_values is keyed by group canonical key; a factor whose group has
    no assigned value is an error.
    """
    features = []
    for factor in factors:
        gkey = factor.premise_group.key()
        if gkey not in group_values:
            raise KeyError(f"no value assigned for group {gkey}")
        features.append(
            Feature(p_value, factor.link.link_id, group_values[gkey])
        )
    return frozenset(features)


class KnowledgeBase:
    """The set of conjoined implication links, indexed by conclusion.

    Mutable while being built; freeze() makes it safely shareable across
    concurrent inference sessions.
    """

    def __init__(self, entities: Mapping[str, str] | None = None):
        self.entities: dict[str, str] = dict(entities or {})
        self._links: dict[str, ConjoinedImplicationLink] = {}
        self._by_conclusion: dict[str, set[str]] = {}
        self._frozen = False

    def freeze(self):
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    def add_link(self, link: ConjoinedImplicationLink) -> str:
        """Store a link; idempotent for identical links. Returns its id."""
        if self._frozen:
            raise LinkValidationError("knowledge base is frozen")
        if not isinstance(link, ConjoinedImplicationLink):
            raise LinkValidationError(f"not a conjoined link: {link!r}")
        link_id = link.link_id
        if link_id not in self._links:
            self._links[link_id] = link
            self._by_conclusion.setdefault(link.conclusion.key(), set()).add(
                link_id
            )
        return link_id

    def links(self) -> tuple[ConjoinedImplicationLink, ...]:
        return tuple(self._links[i] for i in sorted(self._links))

    def get_link(self, link_id: str) -> ConjoinedImplicationLink:
        return self._links[link_id]

    def backward_links(self, q: Predicate) -> tuple[ConjoinedImplicationLink, ...]:
        """All stored links whose conclusion predicate equals q."""
        ids = self._by_conclusion.get(q.key(), ())
        return tuple(self._links[i] for i in sorted(ids))

    def factor_context(self, p: Proposition) -> tuple[PropositionFactor, ...]:
        """Every (link, backfilled group) cause of p, deduplicated.

        The union runs over all abstractions of p and all backward links of
        each; duplicates by (link id, group key) would double-count a cause.
        """
        seen = {}
        for q in abstractions(p):
            for link in self.backward_links(q):
                group = backfill(p, link)
                seen.setdefault(
                    (link.link_id, group.key()),
                    PropositionFactor(p, link, group),
                )
        return tuple(seen[k] for k in sorted(seen))
