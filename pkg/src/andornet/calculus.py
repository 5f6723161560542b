"""Key-value predicate calculus: the language the network reasons over.

A predicate is a function name plus a map from role labels to arguments.
Arguments wrap either a typed constant (a concrete entity) or a typed
variable (an open slot).  A predicate with no open slots is a proposition
and behaves as a boolean random variable.  All values here are immutable
and hashable, so they can be shared freely across threads and used as
dictionary keys.

Canonical key grammar (used verbatim as storage keys and CSV node ids):

    constant     entity:type                e.g.  jack1:jack
    variable     ?type                      e.g.  ?jill
    predicate    fname(role=arg,role=arg)   roles sorted lexicographically
    group        [key&key&...]              member keys sorted lexicographically

Identifier strings (entities, types, roles, function names) are restricted
to ``[A-Za-z0-9_.-]`` so the grammar stays injective.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .errors import BindingTypeError, IllegalSubstitutionError

_NAME_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


def _checked_name(kind: str, value: str) -> str:
    if not isinstance(value, str) or not value:
        raise ValueError(f"{kind} must be a nonempty string, got {value!r}")
    if not _NAME_RE.match(value):
        raise ValueError(
            f"{kind} {value!r} contains characters outside [A-Za-z0-9_.-]"
        )
    return value


@dataclass(frozen=True)
class Constant:
    """A concrete entity reference: entity identifier plus its type."""

    entity_id: str
    type_name: str

    def __post_init__(self):
        _checked_name("entity_id", self.entity_id)
        _checked_name("type_name", self.type_name)

    def key(self) -> str:
        return f"{self.entity_id}:{self.type_name}"


@dataclass(frozen=True)
class Variable:
    """An open slot that any constant of the same type may fill."""

    type_name: str

    def __post_init__(self):
        _checked_name("type_name", self.type_name)

    def key(self) -> str:
        return f"?{self.type_name}"


# An argument is exactly one of the two; isinstance() is the tag query and
# the object itself is the payload.
Argument = Union[Constant, Variable]


@dataclass(frozen=True, init=False)
class Predicate:
    """A function name with a role-label -> argument map.

    Roles holding a Variable are *open*; roles holding a Constant are
    *filled*.  A predicate with at least one open role has no truth value.
    The role map is stored as a tuple sorted by role label so instances
    are hashable and insertion order never matters.
    """

    function_name: str
    role_items: tuple[tuple[str, Argument], ...]

    def __init__(self, function_name: str, roles: Mapping[str, Argument]):
        _checked_name("function_name", function_name)
        items = []
        for label, arg in roles.items():
            _checked_name("role label", label)
            if not isinstance(arg, (Constant, Variable)):
                raise ValueError(f"role {label!r} holds {arg!r}, not an argument")
            items.append((label, arg))
        object.__setattr__(self, "function_name", function_name)
        object.__setattr__(self, "role_items", tuple(sorted(items)))

    @property
    def roles(self) -> dict[str, Argument]:
        return dict(self.role_items)

    @property
    def role_labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.role_items)

    @property
    def open_roles(self) -> tuple[str, ...]:
        return tuple(l for l, a in self.role_items if isinstance(a, Variable))

    @property
    def filled_roles(self) -> tuple[str, ...]:
        return tuple(l for l, a in self.role_items if isinstance(a, Constant))

    def is_grounded(self) -> bool:
        return not self.open_roles

    def key(self) -> str:
        body = ",".join(f"{l}={a.key()}" for l, a in self.role_items)
        return f"{self.function_name}({body})"

    def __repr__(self):
        return f"{type(self).__name__}({self.key()})"


@dataclass(frozen=True, init=False)
class Proposition(Predicate):
    """A fully grounded predicate: every role holds a constant."""

    def __init__(self, function_name: str, roles: Mapping[str, Argument]):
        super().__init__(function_name, roles)
        if self.open_roles:
            raise ValueError(
                f"proposition {self.key()} has open roles {self.open_roles}"
            )


def as_proposition(predicate: Predicate) -> Proposition:
    """Reinterpret a grounded predicate as a proposition."""
    if isinstance(predicate, Proposition):
        return predicate
    return Proposition(predicate.function_name, predicate.roles)


@dataclass(frozen=True, init=False)
class PropositionGroup:
    """An ordered conjunction of propositions (the AND-layer node type).

    Order is preserved for pairing members with link premises, but identity
    (the canonical key) is order-insensitive, since conjunction commutes.
    """

    members: tuple[Proposition, ...]

    def __init__(self, members: Iterable[Proposition]):
        members = tuple(members)
        if not members:
            raise ValueError("proposition group must have at least one member")
        for m in members:
            if not isinstance(m, Proposition):
                raise ValueError(f"group member {m!r} is not a proposition")
        object.__setattr__(self, "members", members)

    def key(self) -> str:
        return "[" + "&".join(sorted(m.key() for m in self.members)) + "]"

    def __repr__(self):
        return f"PropositionGroup({self.key()})"


def bind(
    predicate: Predicate, substitution: Mapping[str, Constant]
) -> Predicate:
    """Fill open roles with constants; returns a Proposition when complete.

    Each substituted constant must match the variable's type, and only open
    roles may be substituted.  An empty substitution returns the predicate
    unchanged.
    """
    if not substitution:
        return predicate
    roles = predicate.roles
    for label, constant in substitution.items():
        arg = roles.get(label)
        if arg is None:
            raise IllegalSubstitutionError(
                f"{predicate.key()} has no role {label!r}"
            )
        if not isinstance(arg, Variable):
            raise IllegalSubstitutionError(
                f"role {label!r} of {predicate.key()} is already filled"
            )
        if not isinstance(constant, Constant):
            raise BindingTypeError(f"substitution for {label!r} is not a constant")
        if constant.type_name != arg.type_name:
            raise BindingTypeError(
                f"role {label!r} expects type {arg.type_name!r}, "
                f"got {constant.key()}"
            )
        roles[label] = constant
    bound = Predicate(predicate.function_name, roles)
    return as_proposition(bound) if bound.is_grounded() else bound


def abstractions(proposition: Proposition) -> tuple[Predicate, ...]:
    """All predicates reachable by opening a nonempty subset of roles.

    Each chosen constant is replaced by a fresh variable of the same type,
    so a proposition with n roles has exactly 2**n - 1 abstractions; the
    proposition itself is never included.  Returned sorted by canonical key.
    """
    labels = proposition.role_labels
    result = []
    for size in range(1, len(labels) + 1):
        for subset in itertools.combinations(labels, size):
            roles = proposition.roles
            for label in subset:
                roles[label] = Variable(roles[label].type_name)
            result.append(Predicate(proposition.function_name, roles))
    return tuple(sorted(result, key=lambda q: q.key()))


def canonical_key(node) -> str:
    """Deterministic identity string for a predicate, proposition or group."""
    if isinstance(node, (Predicate, PropositionGroup)):
        return node.key()
    raise TypeError(f"no canonical key for {node!r}")


_PRED_KEY_RE = re.compile(r"^([A-Za-z0-9_.\-]+)\((.*)\)$")


def parse_key(text: str) -> Predicate:
    """Inverse of the predicate/proposition canonical key grammar."""
    match = _PRED_KEY_RE.match(text.strip())
    if not match:
        raise ValueError(f"not a canonical predicate key: {text!r}")
    fname, body = match.groups()
    roles: dict[str, Argument] = {}
    if body:
        for part in body.split(","):
            label, sep, arg = part.partition("=")
            if not sep:
                raise ValueError(f"bad role entry {part!r} in {text!r}")
            if arg.startswith("?"):
                roles[label] = Variable(arg[1:])
            else:
                entity, sep, type_name = arg.partition(":")
                if not sep:
                    raise ValueError(f"bad argument {arg!r} in {text!r}")
                roles[label] = Constant(entity, type_name)
    predicate = Predicate(fname, roles)
    return as_proposition(predicate) if predicate.is_grounded() else predicate
