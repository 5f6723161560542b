"""Exception types raised across the engine.

Every failure mode callers are expected to distinguish gets its own class;
all inherit from EngineError so a CLI can catch one thing.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class BindingTypeError(EngineError):
    """A substituted constant's type does not match the variable's type."""


class IllegalSubstitutionError(EngineError):
    """A substitution targets a role that is missing or already filled."""


class LinkValidationError(EngineError):
    """An implication link violates its structural invariants."""


class BackfillMismatchError(EngineError):
    """A link's conclusion predicate is not an abstraction of the proposition."""


class CyclicTheoryError(EngineError):
    """The knowledge base induces a directed cycle through a query closure."""


class SchedulingError(EngineError):
    """A message-passing step ran before its input messages existed."""


class ContradictionError(EngineError):
    """Evidence is inconsistent with the deterministic part of the model.

    Carries the id of the node where the zero probability surfaced.
    """

    def __init__(self, node_id, message=None):
        self.node_id = node_id
        super().__init__(message or f"contradictory evidence at node {node_id!r}")


class EvidenceConflictError(EngineError):
    """Two different observed values were asserted for the same node."""


class NumericError(EngineError):
    """A non-finite value appeared where a probability or weight was expected."""


class EnumerationBudgetError(EngineError):
    """An exact-enumeration request exceeded the configured node budget."""


class UngroundedWorldError(EngineError):
    """A training world is missing a proposition the knowledge base needs."""


class StoreIOError(EngineError):
    """A key-value store operation failed after exhausting its retries."""

    def __init__(self, message, attempts):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt(s))")


class FormatVersionError(EngineError):
    """A persisted record declares an unsupported format version."""
