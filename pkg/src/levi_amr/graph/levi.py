"""Levi transformation: every labelled edge becomes a LABEL node between its concepts."""

from __future__ import annotations

from .linearize import _connections, traversal_order
from .types import AmrGraph, LeviGraph, LeviNode, NodeKind, strip_reversal


def to_levi(g: AmrGraph) -> LeviGraph:
    """Levi graph of ``g``.

    Nodes come in linearization order: each concept is followed by the
    LABEL nodes of its edges to previously listed concepts.
    """
    g.warn_if_cyclic()
    order = traversal_order(g, strict=False)
    nodes: list[LeviNode] = []
    arcs: list[tuple[int, int]] = []
    index: dict[int, int] = {}
    for cid, links in _connections(g, order):
        index[cid] = len(nodes)
        nodes.append(LeviNode(NodeKind.CONCEPT, g.concepts[cid].name))
        for _, e, _ in links:
            k = len(nodes)
            nodes.append(LeviNode(NodeKind.LABEL, e.label))
            arcs.append((index[e.head], k))
            arcs.append((k, index[e.dependent]))
    return LeviGraph(tuple(nodes), tuple(arcs), index[g.root])


def from_levi(lv: LeviGraph) -> AmrGraph:
    """Inverse of :func:`to_levi`; reversed labels are flipped and unsuffixed."""
    lv.validate()
    concept_id: dict[int, int] = {}
    names: list[str] = []
    for i, node in enumerate(lv.nodes):
        if node.kind is NodeKind.CONCEPT:
            concept_id[i] = len(names)
            names.append(node.name)
    source: dict[int, int] = {}
    target: dict[int, int] = {}
    for src, dst in lv.arcs:
        if lv.nodes[dst].kind is NodeKind.LABEL:
            source[dst] = src
        else:
            target[src] = dst
    edges = []
    for i, node in enumerate(lv.nodes):
        if node.kind is not NodeKind.LABEL:
            continue
        h, d = concept_id[source[i]], concept_id[target[i]]
        if node.reversed:
            h, d = d, h
        edges.append((h, d, strip_reversal(node.name)))
    g = AmrGraph.build(names, edges, concept_id[lv.root])
    g.warn_if_cyclic()
    return g
