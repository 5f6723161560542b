"""Query-time construction of the bipartite proposition/group graph.

Starting from target propositions, the builder pulls in every direct cause
(factor context), recursing until it hits roots.  Nothing outside that
closure is relevant to the query, so nothing else is stored.  Edges run
cause -> effect: group members are parents of their group node, and group
nodes are parents of the conclusion proposition.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Union

from .calculus import Proposition, PropositionGroup
from .errors import CyclicTheoryError
from .implication import KnowledgeBase

PROPOSITION = "proposition"
GROUP = "group"


@dataclass(frozen=True)
class GraphNode:
    """Either a single-proposition node or a conjunction-group node."""

    kind: str
    node_id: str
    proposition: Proposition | None = None
    group: PropositionGroup | None = None

    def is_group(self) -> bool:
        return self.kind == GROUP


@dataclass
class PropositionGraph:
    """Frozen bipartite DAG with parent/child bookkeeping.

    ``factors_of`` records, per proposition node, the (link_id, group_id)
    pairs feeding its OR factor; ``edge_links`` annotates each group->child
    edge with the link ids it realizes.
    """

    nodes: dict[str, GraphNode] = field(default_factory=dict)
    _parents: dict[str, tuple[str, ...]] = field(default_factory=dict)
    _children: dict[str, tuple[str, ...]] = field(default_factory=dict)
    edge_links: dict[tuple[str, str], tuple[str, ...]] = field(default_factory=dict)
    factors_of: dict[str, tuple[tuple[str, str], ...]] = field(default_factory=dict)
    topo_order: tuple[str, ...] = ()

    def _require(self, node_id: str) -> GraphNode:
        node = self.nodes.get(node_id)
        if node is None:
            raise KeyError(f"unknown node {node_id!r}")
        return node

    def parents(self, node_id: str) -> tuple[str, ...]:
        self._require(node_id)
        return self._parents.get(node_id, ())

    def children(self, node_id: str) -> tuple[str, ...]:
        self._require(node_id)
        return self._children.get(node_id, ())

    def markov_blanket(self, node_id: str) -> tuple[str, ...]:
        """Parents plus children: the message-passing neighborhood."""
        return tuple(sorted(set(self.parents(node_id)) | set(self.children(node_id))))

    def proposition_nodes(self) -> tuple[str, ...]:
        return tuple(z for z in self.topo_order if not self.nodes[z].is_group())

    def group_nodes(self) -> tuple[str, ...]:
        return tuple(z for z in self.topo_order if self.nodes[z].is_group())

    def roots(self) -> tuple[str, ...]:
        return tuple(z for z in self.topo_order if not self._parents.get(z))

    def to_json_dict(self) -> dict:
        """Documented dump format consumed by the CLI inspect command."""
        nodes = []
        for node_id in self.topo_order:
            node = self.nodes[node_id]
            entry = {"id": node_id, "kind": node.kind}
            if node.is_group():
                entry["members"] = sorted(m.key() for m in node.group.members)
            nodes.append(entry)
        edges = [
            {"parent": parent, "child": child, "links": list(links)}
            for (parent, child), links in sorted(self.edge_links.items())
        ]
        # member->group edges carry no link annotation
        member_edges = [
            {"parent": p, "child": c}
            for p in sorted(self._children)
            for c in self._children[p]
            if not self.nodes[p].is_group()
        ]
        return {
            "format_version": 1,
            "nodes": nodes,
            "factor_edges": edges,
            "member_edges": member_edges,
        }


def build_graph(
    kb: KnowledgeBase,
    targets: Union[Proposition, Iterable[Proposition]],
) -> PropositionGraph:
    """Expand the Markov closure of the targets into a bipartite graph.

    Deterministic: node and edge sets, and the roots-first topological
    iteration order, depend only on (kb, targets).  A directed cycle in the
    theory is rejected.
    """
    if isinstance(targets, Proposition):
        targets = [targets]
    targets = sorted(targets, key=lambda p: p.key())
    if not targets:
        raise ValueError("at least one target proposition is required")
    for p in targets:
        if not isinstance(p, Proposition):
            raise ValueError(f"target {p!r} is not fully grounded")

    nodes: dict[str, GraphNode] = {}
    parents: dict[str, set[str]] = {}
    children: dict[str, set[str]] = {}
    edge_links: dict[tuple[str, str], set[str]] = {}
    factors_of: dict[str, tuple[tuple[str, str], ...]] = {}

    GRAY, BLACK = 1, 2
    state: dict[str, int] = {}

    def ensure_node(node: GraphNode):
        nodes.setdefault(node.node_id, node)
        parents.setdefault(node.node_id, set())
        children.setdefault(node.node_id, set())

    def add_edge(parent_id: str, child_id: str):
        parents[child_id].add(parent_id)
        children[parent_id].add(child_id)

    # Iterative DFS: "enter" expands a proposition, "exit" finalizes it.
    # A proposition re-entered while still gray lies on the current path,
    # which means the theory has a directed cycle.
    work: list[tuple[str, Proposition]] = [("enter", p) for p in reversed(targets)]
    while work:
        op, p = work.pop()
        pkey = p.key()
        if op == "exit":
            state[pkey] = BLACK
            continue
        if state.get(pkey) == BLACK:
            continue
        if state.get(pkey) == GRAY:
            raise CyclicTheoryError(f"directed cycle through {pkey}")
        state[pkey] = GRAY
        work.append(("exit", p))
        ensure_node(GraphNode(PROPOSITION, pkey, proposition=p))
        context = kb.factor_context(p)
        factors_of[pkey] = tuple(
            (f.link.link_id, f.premise_group.key()) for f in context
        )
        for factor in context:
            group = factor.premise_group
            gkey = group.key()
            ensure_node(GraphNode(GROUP, gkey, group=group))
            add_edge(gkey, pkey)
            edge_links.setdefault((gkey, pkey), set()).add(factor.link.link_id)
            for member in sorted(group.members, key=lambda m: m.key()):
                mkey = member.key()
                ensure_node(GraphNode(PROPOSITION, mkey, proposition=member))
                add_edge(mkey, gkey)
                if state.get(mkey) == GRAY:
                    raise CyclicTheoryError(f"directed cycle through {mkey}")
                if state.get(mkey) != BLACK:
                    work.append(("enter", member))

    graph = PropositionGraph(
        nodes=nodes,
        _parents={z: tuple(sorted(ps)) for z, ps in parents.items()},
        _children={z: tuple(sorted(cs)) for z, cs in children.items()},
        edge_links={e: tuple(sorted(ls)) for e, ls in edge_links.items()},
        factors_of={z: factors_of.get(z, ()) for z in nodes if not nodes[z].is_group()},
        topo_order=_topological_order(nodes, parents, children),
    )
    return graph


def _topological_order(nodes, parents, children) -> tuple[str, ...]:
    """Kahn's algorithm, breaking ties by canonical key for determinism."""
    indegree = {z: len(parents.get(z, ())) for z in nodes}
    ready = [z for z, d in indegree.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        z = heapq.heappop(ready)
        order.append(z)
        for c in children.get(z, ()):
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != len(nodes):
        raise CyclicTheoryError("cycle survived expansion")  # pragma: no cover
    return tuple(order)
