"""Core graph containers: AMR graphs, Levi graphs and decoder node sequences."""

from __future__ import annotations

import enum
import warnings
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

REVERSE_SUFFIX = "_R"


class GraphError(ValueError):
    """Raised when a graph violates a structural invariant."""


class MalformedLevi(GraphError):
    """A Levi graph whose LABEL nodes do not have exactly one in- and one out-arc."""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (node {index})")
        self.index = index


class CyclicGraphWarning(UserWarning):
    pass


class NodeKind(str, enum.Enum):
    ROOT = "ROOT"
    CONCEPT = "CONCEPT"
    LABEL = "LABEL"


class Mode(str, enum.Enum):
    CONCEPTS = "concepts"
    LEVI = "levi"

    @classmethod
    def coerce(cls, value: "Mode | str") -> "Mode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown linearization mode {value!r}; expected 'concepts' or 'levi'") from None


def is_reversed(label: str) -> bool:
    return label.endswith(REVERSE_SUFFIX) and len(label) > len(REVERSE_SUFFIX)


def reverse_label(label: str) -> str:
    return label + REVERSE_SUFFIX


def strip_reversal(label: str) -> str:
    return label[: -len(REVERSE_SUFFIX)] if is_reversed(label) else label


@dataclass(frozen=True)
class Concept:
    id: int
    name: str


@dataclass(frozen=True)
class AmrEdge:
    head: int
    dependent: int
    label: str

    def as_tuple(self) -> tuple[int, int, str]:
        return (self.head, self.dependent, self.label)


@dataclass(frozen=True, eq=False)
class AmrGraph:
    """Rooted directed graph of concepts with labelled edges.

    Concept ids are dense: ``concepts[i].id == i``. Equality compares concept
    names by id, the root, and the edge *multiset* (edge order is irrelevant).
    """

    concepts: tuple[Concept, ...]
    edges: tuple[AmrEdge, ...]
    root: int
    strict: bool = field(default=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))
        object.__setattr__(self, "edges", tuple(self.edges))
        if not self.concepts:
            raise GraphError("graph has no concepts")
        for i, c in enumerate(self.concepts):
            if c.id != i:
                raise GraphError(f"concept ids must be dense: position {i} holds id {c.id}")
            if not c.name:
                raise GraphError(f"concept {i} has an empty name")
        n = len(self.concepts)
        if not 0 <= self.root < n:
            raise GraphError(f"root {self.root} is not a concept id")
        seen = set()
        for e in self.edges:
            if not (0 <= e.head < n and 0 <= e.dependent < n):
                raise GraphError(f"edge {e.as_tuple()} references a missing concept")
            if e.head == e.dependent:
                raise GraphError(f"self-loop on concept {e.head} is not supported")
            if not e.label:
                raise GraphError(f"edge {e.head}->{e.dependent} has an empty label")
            if e.as_tuple() in seen:
                raise GraphError(f"duplicate edge {e.as_tuple()}")
            seen.add(e.as_tuple())
        if self.strict and self.unreachable():
            raise GraphError(f"concepts {sorted(self.unreachable())} are not connected to the root")

    @classmethod
    def build(
        cls,
        names: Sequence[str],
        edges: Iterable[tuple[int, int, str]] = (),
        root: int = 0,
        strict: bool = False,
    ) -> "AmrGraph":
        return cls(
            tuple(Concept(i, name) for i, name in enumerate(names)),
            tuple(AmrEdge(h, d, label) for h, d, label in edges),
            root,
            strict,
        )

    def __eq__(self, other):
        if not isinstance(other, AmrGraph):
            return NotImplemented
        return (
            self.root == other.root
            and self.names == other.names
            and Counter(e.as_tuple() for e in self.edges) == Counter(e.as_tuple() for e in other.edges)
        )

    def __hash__(self):
        return hash((self.root, self.names, frozenset(Counter(e.as_tuple() for e in self.edges).items())))

    def __repr__(self):
        edges = ", ".join(f"{e.head}-{e.label}->{e.dependent}" for e in self.edges)
        return f"AmrGraph(names={list(self.names)}, edges=[{edges}], root={self.root})"

    def __len__(self):
        return len(self.concepts)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.concepts)

    def incident(self) -> list[list[tuple[AmrEdge, int, bool]]]:
        """Per concept: (edge, other endpoint, outgoing?) for every incident edge."""
        out: list[list[tuple[AmrEdge, int, bool]]] = [[] for _ in self.concepts]
        for e in self.edges:
            out[e.head].append((e, e.dependent, True))
            out[e.dependent].append((e, e.head, False))
        return out

    def unreachable(self) -> set[int]:
        """Concepts not connected to the root, ignoring edge direction."""
        adj = self.incident()
        seen = {self.root}
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for _, v, _ in adj[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return set(range(len(self.concepts))) - seen

    def has_cycle(self) -> bool:
        children = [[] for _ in self.concepts]
        for e in self.edges:
            children[e.head].append(e.dependent)
        state = [0] * len(self.concepts)
        for start in range(len(self.concepts)):
            if state[start]:
                continue
            stack = [(start, iter(children[start]))]
            state[start] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state[nxt] == 1:
                    return True
                elif state[nxt] == 0:
                    state[nxt] = 1
                    stack.append((nxt, iter(children[nxt])))
        return False

    def warn_if_cyclic(self):
        if self.has_cycle():
            warnings.warn("graph contains a directed cycle; processing it anyway", CyclicGraphWarning, stacklevel=3)

    def relabeled(self, order: Sequence[int]) -> "AmrGraph":
        """Renumber concepts so that ``order[i]`` becomes concept ``i``."""
        if sorted(order) != list(range(len(self.concepts))):
            raise GraphError("order must be a permutation of concept ids")
        new_id = {old: new for new, old in enumerate(order)}
        return AmrGraph.build(
            [self.concepts[old].name for old in order],
            [(new_id[e.head], new_id[e.dependent], e.label) for e in self.edges],
            new_id[self.root],
        )

    def canonical(self) -> "AmrGraph":
        """Renumber concepts into traversal order (the order used by linearization)."""
        from .linearize import traversal_order

        return self.relabeled(traversal_order(self, strict=False))

    def to_dict(self) -> dict:
        return {
            "concepts": [c.name for c in self.concepts],
            "edges": [[e.head, e.dependent, e.label] for e in self.edges],
            "root": self.root,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AmrGraph":
        return cls.build(data["concepts"], [tuple(e) for e in data["edges"]], data["root"])


def isomorphic(a: AmrGraph, b: AmrGraph) -> bool:
    """Graph isomorphism respecting concept names, edge label multisets and the root."""
    import networkx as nx
    from networkx.algorithms.isomorphism import DiGraphMatcher

    if len(a) != len(b) or len(a.edges) != len(b.edges):
        return False
    if Counter(a.names) != Counter(b.names):
        return False

    def to_nx(g: AmrGraph):
        G = nx.DiGraph()
        for c in g.concepts:
            G.add_node(c.id, name=c.name, root=c.id == g.root)
        labels: dict[tuple[int, int], list[str]] = {}
        for e in g.edges:
            labels.setdefault((e.head, e.dependent), []).append(e.label)
        for (h, d), ls in labels.items():
            G.add_edge(h, d, labels=tuple(sorted(ls)))
        return G

    matcher = DiGraphMatcher(
        to_nx(a),
        to_nx(b),
        node_match=lambda x, y: x["name"] == y["name"] and x["root"] == y["root"],
        edge_match=lambda x, y: x["labels"] == y["labels"],
    )
    return matcher.is_isomorphic()


@dataclass(frozen=True)
class LeviNode:
    kind: NodeKind
    name: str
    reversed: bool = False

    def __post_init__(self):
        if self.kind not in (NodeKind.CONCEPT, NodeKind.LABEL):
            raise GraphError(f"Levi nodes are CONCEPT or LABEL, not {self.kind}")
        if self.kind is NodeKind.LABEL and self.reversed != is_reversed(self.name):
            raise GraphError(f"label {self.name!r}: reversed flag must match the {REVERSE_SUFFIX} suffix")


@dataclass(frozen=True)
class LeviGraph:
    """Unlabelled graph whose nodes are concepts and relation labels.

    ``root`` indexes the CONCEPT node that was the AMR root.
    """

    nodes: tuple[LeviNode, ...]
    arcs: tuple[tuple[int, int], ...]
    root: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(tuple(a) for a in self.arcs))

    def validate(self) -> None:
        n = len(self.nodes)
        if not 0 <= self.root < n or self.nodes[self.root].kind is not NodeKind.CONCEPT:
            raise MalformedLevi("root must be a CONCEPT node", self.root)
        indeg = [0] * n
        outdeg = [0] * n
        for src, dst in self.arcs:
            if not (0 <= src < n and 0 <= dst < n):
                raise MalformedLevi("arc endpoint out of range", src if not 0 <= src < n else dst)
            if self.nodes[src].kind is self.nodes[dst].kind:
                raise MalformedLevi(f"{self.nodes[src].kind.value}->{self.nodes[dst].kind.value} arc", dst)
            outdeg[src] += 1
            indeg[dst] += 1
        for i, node in enumerate(self.nodes):
            if node.kind is NodeKind.LABEL and (indeg[i] != 1 or outdeg[i] != 1):
                raise MalformedLevi(f"label {node.name!r} has in-degree {indeg[i]}, out-degree {outdeg[i]}", i)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"kind": n.kind.value, "name": n.name, "reversed": n.reversed} for n in self.nodes],
            "arcs": [list(a) for a in self.arcs],
            "root": self.root,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "LeviGraph":
        nodes = tuple(LeviNode(NodeKind(n["kind"]), n["name"], n.get("reversed", False)) for n in data["nodes"])
        return cls(nodes, tuple(tuple(a) for a in data["arcs"]), data.get("root", 0))


@dataclass(frozen=True)
class Entry:
    kind: NodeKind
    name: str


@dataclass(frozen=True)
class NodeSequence:
    """Autoregressive output sequence.

    ``arcs[t]`` holds the earlier indices connected to entry ``t``. In
    CONCEPTS mode ``labels[t]`` maps each index of ``arcs[t]`` to the relation
    labels of that arc, using the ``_R`` convention when the entry at ``t`` is
    the gold dependent; in LEVI mode ``labels`` is empty.
    """

    entries: tuple[Entry, ...]
    arcs: tuple[frozenset[int], ...]
    mode: Mode = Mode.CONCEPTS
    labels: tuple[Mapping[int, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "arcs", tuple(frozenset(a) for a in self.arcs))
        object.__setattr__(self, "labels", tuple(dict(x) for x in self.labels))
        object.__setattr__(self, "mode", Mode.coerce(self.mode))
        if not self.entries or self.entries[0].kind is not NodeKind.ROOT:
            raise GraphError("entry 0 must be ROOT")
        if len(self.arcs) != len(self.entries):
            raise GraphError("one arc set per entry is required")
        for t, arc in enumerate(self.arcs):
            bad = [j for j in arc if not 0 <= j < t]
            if bad:
                raise GraphError(f"entry {t} has arcs to non-earlier indices {sorted(bad)}")
        if self.labels and len(self.labels) != len(self.entries):
            raise GraphError("labels must be given for every entry or not at all")

    def __len__(self):
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode.value,
            "entries": [{"kind": e.kind.value, "name": e.name} for e in self.entries],
            "arcs": [sorted(a) for a in self.arcs],
        }
        if self.labels:
            out["labels"] = [{str(j): list(ls) for j, ls in sorted(x.items())} for x in self.labels]
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "NodeSequence":
        labels = tuple({int(j): tuple(ls) for j, ls in x.items()} for x in data.get("labels", ()))
        return cls(
            tuple(Entry(NodeKind(e["kind"]), e["name"]) for e in data["entries"]),
            tuple(frozenset(a) for a in data["arcs"]),
            Mode.coerce(data.get("mode", "concepts")),
            labels,
        )
