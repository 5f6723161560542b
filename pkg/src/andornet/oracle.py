"""Ground truth by brute force: enumerate every joint assignment.

Deliberately unclever.  Group values are deterministic conjunctions of
their members, so only proposition nodes are enumerated and the budget is
2**(number of proposition nodes).  This is the reference implementation the
message-passing engine is checked against.
"""

from __future__ import annotations

from typing import Mapping

from .errors import ContradictionError, EnumerationBudgetError
from .factors import build_conditional_tables

DEFAULT_BUDGET = 24


def exact_marginals(
    graph,
    factors,
    evidence: Mapping[str, int] | None = None,
    budget: int = DEFAULT_BUDGET,
) -> dict[str, float]:
    """P(z=1 | evidence) for every node, by summing the joint.

    The joint mass of an assignment is the product over proposition nodes
    of their conditional given the derived group values.  Assignments
    incompatible with the evidence contribute nothing; zero total mass
    means the evidence contradicts the deterministic factors.
    """
    evidence = dict(evidence or {})
    for node_id in evidence:
        if node_id not in graph.nodes:
            raise KeyError(f"evidence node {node_id!r} not in graph")

    p_ids = sorted(graph.proposition_nodes())
    if len(p_ids) > budget:
        raise EnumerationBudgetError(
            f"{len(p_ids)} proposition nodes exceed the budget of {budget}"
        )
    p_index = {p: i for i, p in enumerate(p_ids)}
    g_ids = sorted(graph.group_nodes())
    g_masks = {
        g: _mask(graph.parents(g), p_index) for g in g_ids
    }

    tables = build_conditional_tables(graph, factors)
    # Per proposition node: mask/shifts to read its parent groups' values.
    node_parents = {p: graph.parents(p) for p in p_ids}

    true_mass = {z: 0.0 for z in graph.topo_order}
    total = 0.0
    for assignment in range(1 << len(p_ids)):
        g_value = {
            g: 1 if (assignment & mask) == mask else 0
            for g, mask in g_masks.items()
        }
        consistent = True
        for node_id, observed in evidence.items():
            actual = (
                g_value[node_id]
                if node_id in g_value
                else (assignment >> p_index[node_id]) & 1
            )
            if actual != observed:
                consistent = False
                break
        if not consistent:
            continue
        mass = 1.0
        for p in p_ids:
            bits = 0
            for j, parent in enumerate(node_parents[p]):
                bits |= g_value[parent] << j
            mass *= tables[p][bits][(assignment >> p_index[p]) & 1]
            if mass == 0.0:
                break
        if mass == 0.0:
            continue
        total += mass
        for p in p_ids:
            if (assignment >> p_index[p]) & 1:
                true_mass[p] += mass
        for g in g_ids:
            if g_value[g]:
                true_mass[g] += mass

    if total <= 0.0:
        raise ContradictionError(
            sorted(evidence)[0] if evidence else "<model>",
            "evidence has zero probability under the model",
        )
    return {z: true_mass[z] / total for z in graph.topo_order}


def _mask(member_ids, p_index) -> int:
    mask = 0
    for m in member_ids:
        mask |= 1 << p_index[m]
    return mask
