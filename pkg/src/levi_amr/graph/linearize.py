"""Breadth-first linearization of AMR graphs and restoration from node sequences.

Traversal order: breadth-first from the root, ignoring edge direction. At
each concept the unvisited neighbours are taken largest-subgraph first
(number of concepts reachable along outgoing edges), then by relation label,
outgoing before incoming, and concept name. In LEVI mode every new concept is
followed by one LABEL entry per edge tying it to an earlier concept, nearest
earlier concept first.
"""

from __future__ import annotations

import warnings
from collections import deque

from .types import (
    AmrGraph,
    Entry,
    GraphError,
    Mode,
    NodeKind,
    NodeSequence,
    is_reversed,
    reverse_label,
    strip_reversal,
)


class OrphanLabelWarning(UserWarning):
    pass


def _reach_sizes(g: AmrGraph) -> list[int]:
    children = [[] for _ in g.concepts]
    for e in g.edges:
        children[e.head].append(e.dependent)
    sizes = []
    for start in range(len(g.concepts)):
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in children[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        sizes.append(len(seen))
    return sizes


def traversal_order(g: AmrGraph, strict: bool = True) -> list[int]:
    """Concept ids in linearization order.

    With ``strict=False`` concepts unreachable from the root are visited
    afterwards, restarting the search from the smallest unvisited id.
    """
    sizes = _reach_sizes(g)
    adj = g.incident()
    for items in adj:
        items.sort(key=lambda it: (-sizes[it[1]], it[0].label, not it[2], g.concepts[it[1]].name, it[1]))
    order: list[int] = []
    seen: set[int] = set()

    def bfs(start: int):
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            order.append(u)
            for _, v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)

    bfs(g.root)
    if len(order) < len(g.concepts):
        if strict:
            missing = sorted(set(range(len(g.concepts))) - seen)
            raise GraphError(f"concepts {missing} are not connected to the root")
        for start in range(len(g.concepts)):
            if start not in seen:
                bfs(start)
    return order


def _connections(g: AmrGraph, order: list[int]):
    """For each concept (in ``order``), its edges to earlier concepts, nearest first.

    Yields ``(concept_id, [(earlier_position, edge, new_is_dependent), ...])``.
    """
    position = {cid: p for p, cid in enumerate(order)}
    adj = g.incident()
    for p, cid in enumerate(order):
        links = []
        for e, other, outgoing in adj[cid]:
            q = position[other]
            if q < p:
                links.append((q, e, not outgoing))
        links.sort(key=lambda x: (-x[0], x[1].label, not x[2]))
        yield cid, links


def linearize(g: AmrGraph, mode: Mode | str = Mode.LEVI, strict: bool = True) -> NodeSequence:
    """Turn ``g`` into the node sequence a decoder is trained to produce."""
    mode = Mode.coerce(mode)
    g.warn_if_cyclic()
    order = traversal_order(g, strict=strict)
    entries = [Entry(NodeKind.ROOT, "<root>")]
    arcs: list[frozenset[int]] = [frozenset()]
    labels: list[dict[int, tuple[str, ...]]] = [{}]

    if mode is Mode.CONCEPTS:
        for cid, links in _connections(g, order):
            entries.append(Entry(NodeKind.CONCEPT, g.concepts[cid].name))
            arc_labels: dict[int, list[str]] = {}
            for q, e, new_is_dep in links:
                # the new node heads every arc; a gold dependent gets the reversed label
                label = reverse_label(e.label) if new_is_dep else e.label
                arc_labels.setdefault(q + 1, []).append(label)
            arcs.append(frozenset(arc_labels))
            labels.append({j: tuple(ls) for j, ls in arc_labels.items()})
        return NodeSequence(tuple(entries), tuple(arcs), mode, tuple(labels))

    entry_of: dict[int, int] = {}
    for cid, links in _connections(g, order):
        entry_of[cid] = len(entries)
        entries.append(Entry(NodeKind.CONCEPT, g.concepts[cid].name))
        arcs.append(frozenset())
        for _, e, new_is_dep in links:
            other = e.head if new_is_dep else e.dependent
            # a LABEL's nearest concept is its dependent unless the label is reversed
            label = e.label if new_is_dep else reverse_label(e.label)
            entries.append(Entry(NodeKind.LABEL, label))
            arcs.append(frozenset({entry_of[cid], entry_of[other]}))
    return NodeSequence(tuple(entries), tuple(arcs), mode)


def restore(seq: NodeSequence, mode: Mode | str | None = None, repairs: list[str] | None = None) -> AmrGraph:
    """Rebuild an AMR graph from a node sequence and its arc sets.

    Concepts are numbered in sequence order; the first concept is the root.
    Problems that can be repaired (orphan labels, arcs to non-concepts,
    duplicate edges) are appended to ``repairs`` and reported as warnings.
    """
    mode = Mode.coerce(mode if mode is not None else seq.mode)
    log = repairs if repairs is not None else []

    def note(msg: str, warn: bool = False):
        log.append(msg)
        if warn:
            warnings.warn(msg, OrphanLabelWarning, stacklevel=3)

    concept_id: dict[int, int] = {}
    names: list[str] = []
    for t, entry in enumerate(seq.entries):
        if entry.kind is NodeKind.CONCEPT:
            concept_id[t] = len(names)
            names.append(entry.name)
    if not names:
        raise GraphError("node sequence contains no concepts")

    edges: list[tuple[int, int, str]] = []
    seen: set[tuple[int, int, str]] = set()

    def add(h: int, d: int, label: str, t: int):
        edge = (h, d, label)
        if h == d:
            note(f"entry {t}: dropped self-loop on concept {h}")
        elif edge in seen:
            note(f"entry {t}: dropped duplicate edge {edge}")
        else:
            seen.add(edge)
            edges.append(edge)

    if mode is Mode.CONCEPTS:
        for t, entry in enumerate(seq.entries):
            if entry.kind is not NodeKind.CONCEPT or not seq.arcs[t]:
                continue
            arc_labels = seq.labels[t] if seq.labels else {}
            for j in sorted(seq.arcs[t]):
                if j not in concept_id:
                    note(f"entry {t}: ignored arc to non-concept entry {j}")
                    continue
                if not arc_labels.get(j):
                    raise GraphError(f"entry {t}: arc to {j} has no relation label")
                for label in arc_labels[j]:
                    if is_reversed(label):
                        add(concept_id[j], concept_id[t], strip_reversal(label), t)
                    else:
                        add(concept_id[t], concept_id[j], label, t)
    else:
        for t, entry in enumerate(seq.entries):
            if entry.kind is not NodeKind.LABEL:
                continue
            ends = sorted((j for j in seq.arcs[t] if j in concept_id), reverse=True)
            if len(ends) < 2:
                note(f"entry {t}: orphan label {entry.name!r} with concept arcs {ends} dropped", warn=True)
                continue
            dependent = ends[0]
            if len(ends) > 2:
                note(f"entry {t}: label {entry.name!r} has {len(ends) - 1} heads; one edge per head")
            for head in ends[1:]:
                if is_reversed(entry.name):
                    add(concept_id[dependent], concept_id[head], strip_reversal(entry.name), t)
                else:
                    add(concept_id[head], concept_id[dependent], entry.name, t)

    g = AmrGraph.build(names, edges, 0)
    g.warn_if_cyclic()
    return g
