"""Iterative belief propagation over the built proposition graph.

Each node carries a pi value (belief flowing from causes) and a lambda
value (belief flowing from effects); each directed edge carries one message
in each direction.  Observing a node clamps both of its values to the
observed indicator, which is what lets evidence travel forward through pi
messages as well as backward through lambda messages.

One fan-out iteration is a lambda sweep in children-before-parents order
followed by a pi sweep in parents-before-children order.  On tree-shaped
graphs a single fan-out already yields exact posteriors; on graphs with
undirected cycles further iterations refine the approximation.  Messages
are renormalized after every computation so deterministic factors cannot
underflow; the posterior is unaffected because it is normalized anyway.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import (
    ContradictionError,
    EvidenceConflictError,
    NumericError,
    SchedulingError,
)
from .factors import build_conditional_tables, noisy_or_probability


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    node_id: str
    p_true: float


class Trace:
    """Per-iteration posterior log: one row per (iteration, node)."""

    def __init__(self, rows: Iterable[TraceRow] = ()):
        self.rows = list(rows)

    def append(self, row: TraceRow):
        self.rows.append(row)

    def iterations(self) -> int:
        return max((r.iteration for r in self.rows), default=-1)

    def at(self, iteration: int) -> dict[str, float]:
        return {r.node_id: r.p_true for r in self.rows if r.iteration == iteration}

    def csv_lines(self) -> list[str]:
        return [
            f"{r.iteration},{r.node_id},{r.p_true:.9f}" for r in self.rows
        ]

    def write_csv(self, path: str):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in self.rows:
                writer.writerow([row.iteration, row.node_id, f"{row.p_true:.9f}"])


def _check_finite(node_id, pair):
    if not (math.isfinite(pair[0]) and math.isfinite(pair[1])):
        raise NumericError(f"non-finite belief at node {node_id!r}: {pair}")
    return pair


def _normalized(pair):
    total = pair[0] + pair[1]
    if total > 0.0:
        return (pair[0] / total, pair[1] / total)
    return pair  # all-zero: a contradiction, surfaced when the posterior is read


class BeliefState:
    """All pi/lambda tables for one inference session over a frozen graph.

    Construction runs the root-first pi sweep, so iteration 0 of the trace
    shows the prior.  Set evidence, then call fan_out()/run().
    """

    def __init__(self, graph, factors):
        self.graph = graph
        self.factors = factors
        self.tables = build_conditional_tables(graph, factors)
        self.forward_params = {
            z: factors.forward_params(graph, z) for z in graph.topo_order
        }
        self.evidence: dict[str, int] = {}
        self.iteration = 0
        self.pi_val: dict[str, tuple[float, float]] = {}
        self.lam_val: dict[str, tuple[float, float]] = {
            z: (1.0, 1.0) for z in graph.topo_order
        }
        self.pi_msg: dict[tuple[str, str], tuple[float, float]] = {}
        self.lam_msg: dict[tuple[str, str], tuple[float, float]] = {
            (c, a): (1.0, 1.0)
            for a in graph.topo_order
            for c in graph.children(a)
        }
        self.trace = Trace()
        for z in graph.topo_order:
            self.pi_value(z)
            for c in graph.children(z):
                self.pi_message(z, c)
        self._record_iteration()

    # -- evidence ---------------------------------------------------------

    def set_evidence(self, node_id: str, value: int):
        """Clamp a node to an observed value; conflicting re-asserts fail."""
        if node_id not in self.graph.nodes:
            raise KeyError(f"unknown node {node_id!r}")
        if value not in (0, 1):
            raise ValueError(f"evidence value must be 0 or 1, got {value!r}")
        previous = self.evidence.get(node_id)
        if previous is not None and previous != value:
            raise EvidenceConflictError(
                f"node {node_id} already observed as {previous}, got {value}"
            )
        self.evidence[node_id] = value
        self.pi_val[node_id] = self._clamp(self.pi_val[node_id], value)
        self.lam_val[node_id] = self._clamp(self.lam_val[node_id], value)

    @staticmethod
    def _clamp(pair, value):
        return (0.0, pair[1]) if value == 1 else (pair[0], 0.0)

    # -- value and message computations ------------------------------------

    def pi_value(self, node_id: str) -> tuple[float, float]:
        """Forward belief: sum over parent assignments, or the root prior."""
        parents = self.graph.parents(node_id)
        table = self.tables[node_id]
        params = self.forward_params[node_id]
        if not parents:
            raw = table[0]
        elif params is not None:
            true_probs = []
            for _, group_id in self.graph.factors_of[node_id]:
                msg = self.pi_msg.get((group_id, node_id))
                if msg is None:
                    raise SchedulingError(
                        f"pi message {group_id}->{node_id} not yet computed"
                    )
                p = _normalized(msg)[1]
                true_probs.append(p)
            on = noisy_or_probability(params, true_probs)
            raw = (1.0 - on, on)
        else:
            msgs = []
            for a in parents:
                msg = self.pi_msg.get((a, node_id))
                if msg is None:
                    raise SchedulingError(
                        f"pi message {a}->{node_id} not yet computed"
                    )
                msgs.append(_normalized(msg))
            raw = [0.0, 0.0]
            for bits in range(1 << len(parents)):
                weight = 1.0
                for j in range(len(parents)):
                    weight *= msgs[j][(bits >> j) & 1]
                entry = table[bits]
                raw[0] += entry[0] * weight
                raw[1] += entry[1] * weight
            raw = tuple(raw)
        observed = self.evidence.get(node_id)
        if observed is not None:
            raw = self._clamp(raw, observed)
        value = _normalized(_check_finite(node_id, raw))
        self.pi_val[node_id] = value
        return value

    def lambda_value(self, node_id: str) -> tuple[float, float]:
        """Backward belief: product of children's messages (empty product 1)."""
        raw = [1.0, 1.0]
        for c in self.graph.children(node_id):
            msg = self.lam_msg[(c, node_id)]
            raw[0] *= msg[0]
            raw[1] *= msg[1]
        observed = self.evidence.get(node_id)
        if observed is not None:
            raw = self._clamp(raw, observed)
        value = _normalized(_check_finite(node_id, tuple(raw)))
        self.lam_val[node_id] = value
        return value

    def pi_message(self, parent_id: str, child_id: str) -> tuple[float, float]:
        """Parent's forward message: its pi value times its other children's lambdas."""
        pi = self.pi_val.get(parent_id)
        if pi is None:
            raise SchedulingError(f"pi value of {parent_id} not yet computed")
        raw = [pi[0], pi[1]]
        for y in self.graph.children(parent_id):
            if y == child_id:
                continue
            msg = self.lam_msg[(y, parent_id)]
            raw[0] *= msg[0]
            raw[1] *= msg[1]
        value = _normalized(_check_finite(parent_id, tuple(raw)))
        self.pi_msg[(parent_id, child_id)] = value
        return value

    def lambda_message(self, child_id: str, parent_id: str) -> tuple[float, float]:
        """Child's backward message to one parent.

        Marginalizes the child's conditional over its other parents using
        their current pi messages, then folds in the child's lambda value.
        """
        parents = self.graph.parents(child_id)
        index = parents.index(parent_id)
        others = [a for a in parents if a != parent_id]
        other_msgs = []
        for a in others:
            msg = self.pi_msg.get((a, child_id))
            if msg is None:
                raise SchedulingError(f"pi message {a}->{child_id} not yet computed")
            other_msgs.append(_normalized(msg))
        lam_child = self.lam_val[child_id]
        table = self.tables[child_id]
        raw = [0.0, 0.0]
        for value in (0, 1):
            for bits in range(1 << len(others)):
                weight = 1.0
                full = value << index
                position = 0
                for j in range(len(parents)):
                    if j == index:
                        continue
                    bit = (bits >> position) & 1
                    weight *= other_msgs[position][bit]
                    full |= bit << j
                    position += 1
                entry = table[full]
                raw[value] += (
                    entry[0] * lam_child[0] + entry[1] * lam_child[1]
                ) * weight
        value = _normalized(_check_finite(child_id, tuple(raw)))
        self.lam_msg[(child_id, parent_id)] = value
        return value

    # -- posteriors ---------------------------------------------------------

    def marginal_pair(self, node_id: str) -> tuple[float, float]:
        """(P(z=0|e), P(z=1|e)); zero total mass means contradictory evidence."""
        pi = self.pi_val[node_id]
        lam = self.lam_val[node_id]
        raw = (pi[0] * lam[0], pi[1] * lam[1])
        _check_finite(node_id, raw)
        total = raw[0] + raw[1]
        if total <= 0.0:
            raise ContradictionError(node_id)
        return (raw[0] / total, raw[1] / total)

    def marginal(self, node_id: str) -> float:
        return self.marginal_pair(node_id)[1]

    def marginals(self) -> dict[str, float]:
        return {z: self.marginal(z) for z in self.graph.topo_order}

    # -- iteration ------------------------------------------------------------

    def _record_iteration(self):
        for z in self.graph.topo_order:
            self.trace.append(TraceRow(self.iteration, z, self.marginal(z)))

    def fan_out(self) -> dict[str, float]:
        """One iteration: lambda sweep up the graph, then pi sweep down it.

        Returns the marginals recorded for this iteration.
        """
        self.iteration += 1
        for z in reversed(self.graph.topo_order):
            self.lambda_value(z)
            for a in self.graph.parents(z):
                self.lambda_message(z, a)
        for z in self.graph.topo_order:
            self.pi_value(z)
            for c in self.graph.children(z):
                self.pi_message(z, c)
        self._record_iteration()
        return self.trace.at(self.iteration)

    def run(self, rounds: int) -> Trace:
        """Execute a fixed number of fan-outs; the trace includes iteration 0."""
        for _ in range(rounds):
            self.fan_out()
        return self.trace

    def run_until_converged(
        self, tolerance: float = 1e-7, max_rounds: int = 50
    ) -> int:
        """Fan out until the largest marginal change drops below tolerance."""
        previous = self.marginals()
        for round_index in range(1, max_rounds + 1):
            current = self.fan_out()
            delta = max(abs(current[z] - previous[z]) for z in current)
            if delta < tolerance:
                return round_index
            previous = current
        return max_rounds
