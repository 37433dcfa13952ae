"""Reading and writing graphs in Penman notation."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .types import AmrGraph, GraphError

# roles ending in -of that are not inverses
NON_INVERTED_ROLES = frozenset({"consist-of", "prep-out-of", "prep-on-behalf-of"})

_TOKEN = re.compile(r'\s*(?:(?P<open>\()|(?P<close>\))|(?P<slash>/)|(?P<role>:[^\s()"/:]*)|(?P<string>"(?:[^"\\]|\\.)*")|(?P<symbol>[^\s()"/:]+))')
_CONSTANT = re.compile(r'^(?:"(?:[^"\\]|\\.)*"|[+-]|-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)$')


class PenmanError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass
class PenmanRecord:
    """One graph from a corpus file with its ``# ::key value`` metadata."""

    graph: AmrGraph
    metadata: dict[str, str] = field(default_factory=dict)
    text: str = ""


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    end = len(text.rstrip())
    while pos < end:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise PenmanError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


def parse_penman(text: str) -> AmrGraph:
    """Parse a single Penman graph.

    Inverse roles (``:ARG0-of``) are normalized to forward edges. A bare
    symbol names a re-entrant variable when that variable is defined anywhere
    in the graph; otherwise it is a constant, which becomes its own concept.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise PenmanError("empty input", 0)
    names: list[str] = []
    var_ids: dict[str, int] = {}
    # (head slot, role, target slot, role offset); slots are var names or concept ids
    pending: list[tuple[object, str, object, bool, int]] = []
    pos = 0

    def peek() -> tuple[str, str, int]:
        if pos >= len(tokens):
            raise PenmanError("unbalanced parentheses: missing ')'", len(text))
        return tokens[pos]

    def take(kind: str) -> tuple[str, str, int]:
        nonlocal pos
        tok = peek()
        if tok[0] != kind:
            raise PenmanError(f"expected {kind} but found {tok[1]!r}", tok[2])
        pos += 1
        return tok

    def node() -> str:
        nonlocal pos
        take("open")
        _, var, var_at = take("symbol")
        if var in var_ids:
            raise PenmanError(f"duplicate instance assignment for variable {var!r}", var_at)
        take("slash")
        kind, concept, at = peek()
        if kind not in ("symbol", "string"):
            raise PenmanError(f"expected a concept after '/' but found {concept!r}", at)
        pos += 1
        var_ids[var] = len(names)
        names.append(concept)
        while True:
            kind, value, at = peek()
            if kind == "close":
                pos += 1
                return var
            if kind != "role":
                raise PenmanError(f"expected a role or ')' but found {value!r}", at)
            pos += 1
            role = value[1:]
            if not role:
                raise PenmanError("empty role name", at)
            kind, target, t_at = peek()
            if kind == "open":
                pending.append((var, role, node(), True, at))
            elif kind in ("symbol", "string"):
                pos += 1
                pending.append((var, role, (target, t_at), False, at))
            else:
                raise PenmanError(f"role :{role} has no target", at)

    top = node()
    if pos != len(tokens):
        kind, value, at = tokens[pos]
        if kind == "close":
            raise PenmanError("unbalanced parentheses: unexpected ')'", at)
        raise PenmanError(f"trailing content {value!r} after the graph", at)

    edges = []
    for head_var, role, target, is_node, at in pending:
        head = var_ids[head_var]
        if is_node:
            dep = var_ids[target]
        else:
            symbol, _ = target
            if symbol in var_ids:
                dep = var_ids[symbol]
            else:
                dep = len(names)
                names.append(symbol)
        if role.endswith("-of") and role not in NON_INVERTED_ROLES:
            head, dep, role = dep, head, role[: -len("-of")]
        if head == dep:
            raise PenmanError(f"self-loop :{role} on a single variable", at)
        edges.append((head, dep, role))
    try:
        return AmrGraph.build(names, _dedupe(edges), var_ids[top])
    except GraphError as exc:
        raise PenmanError(str(exc), 0) from exc


def _dedupe(edges):
    seen = set()
    out = []
    for e in edges:
        if e not in seen:
            seen.add(e)
            out.append(e)
    return out


def _is_constant(name: str) -> bool:
    return bool(_CONSTANT.match(name))


def _spanning_tree(g: AmrGraph, adj) -> dict[int, int]:
    """Tree edge (by ``id``) for each non-root concept: outgoing edges first, shallowest first."""
    tree: dict[int, int] = {}
    reached = {g.root}
    for follow_incoming in (False, True):
        frontier = sorted(reached) if follow_incoming else [g.root]
        queue = deque(frontier)
        while queue:
            u = queue.popleft()
            for e, v, outgoing in adj[u]:
                if v in reached or (not outgoing and not follow_incoming):
                    continue
                reached.add(v)
                tree[v] = id(e)
                queue.append(v)
    return tree


def emit_penman(g: AmrGraph, indent: int = 4) -> str:
    """Serialize ``g`` as Penman text with variables ``v<id>``.

    Every concept must be connected to the root. Concepts are nested under a
    head where possible and written with inverse roles otherwise. Constant-like
    leaves (quoted strings, numbers, ``+``/``-``) with a single incoming edge
    are written inline.
    """
    unreachable = g.unreachable()
    if unreachable:
        raise GraphError(f"cannot serialize: concepts {sorted(unreachable)} are unreachable from the root")
    adj = g.incident()
    for items in adj:
        items.sort(key=lambda it: (not it[2], it[0].label, g.concepts[it[1]].name, it[1]))
    tree = _spanning_tree(g, adj)
    inline = {
        c.id
        for c in g.concepts
        if c.id != g.root and _is_constant(c.name) and len(adj[c.id]) == 1 and not adj[c.id][0][2]
    }
    emitted: set[int] = set()

    def emit(u: int, depth: int) -> str:
        parts = [f"(v{u} / {g.concepts[u].name}"]
        pad = "\n" + " " * (indent * (depth + 1))
        for e, v, outgoing in adj[u]:
            # incoming edges are written at their head unless they carry the nesting of ``v``
            if id(e) in emitted or (not outgoing and tree.get(v) != id(e)):
                continue
            emitted.add(id(e))
            role = f":{e.label}" if outgoing else f":{e.label}-of"
            if v in inline:
                target = g.concepts[v].name
            elif tree.get(v) == id(e):
                target = emit(v, depth + 1)
            else:
                target = f"v{v}"
            parts.append(f"{pad}{role} {target}")
        return "".join(parts) + ")"

    return emit(g.root, 0)


def _blocks(text: str) -> Iterator[tuple[list[str], str]]:
    for chunk in re.split(r"\n[ \t]*\n", text):
        lines = [line for line in chunk.splitlines() if line.strip()]
        comments = []
        while lines and lines[0].lstrip().startswith("#"):
            comments.append(lines.pop(0).strip())
        if lines:
            yield comments, "\n".join(lines)


def _metadata(comments: list[str]) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in comments:
        for m in re.finditer(r"::(\S+)(?:[ \t]+(.*?))?(?=\s+::\S|$)", line):
            meta[m.group(1)] = (m.group(2) or "").strip()
    return meta


def read_penman(source: str | Path) -> list[PenmanRecord]:
    """Read a corpus file: blank-line separated graphs, each optionally preceded by ``#`` lines."""
    text = Path(source).read_text(encoding="utf-8")
    return loads_penman(text)


def loads_penman(text: str) -> list[PenmanRecord]:
    records = []
    for comments, body in _blocks(text):
        records.append(PenmanRecord(parse_penman(body), _metadata(comments), body))
    return records


def dumps_penman(records: list[PenmanRecord] | list[AmrGraph]) -> str:
    chunks = []
    for rec in records:
        if isinstance(rec, AmrGraph):
            rec = PenmanRecord(rec)
        lines = [f"# ::{k} {v}".rstrip() for k, v in rec.metadata.items()]
        lines.append(emit_penman(rec.graph))
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"
