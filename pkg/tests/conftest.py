from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from levi_amr.graph import AmrGraph, parse_penman

DATA = Path(__file__).resolve().parents[1] / "src" / "levi_amr" / "data"
TOY_AMR = DATA / "toy.amr"
TOY_FEATURES = DATA / "toy.features.tsv"
TOY_STATS = DATA / "toy.stats.json"

BOY_GIRL = "(w / want-01 :ARG0 (b / boy) :ARG1 (b2 / believe-01 :ARG0 (g / girl) :ARG1 b))"
BOY_GIRL_TOKENS = "The boy wants the girl to believe him".split()
BOY_GIRL_LEMMAS = ["the", "boy", "want", "the", "girl", "to", "believe", "he"]

NAMES = ["want-01", "boy", "girl", "believe-01", "dog", "and", "-", "5", '"Paris"', "city"]
LABELS = ["ARG0", "ARG1", "ARG2", "mod", "op1", "location", "polarity"]


def random_amr(rng: np.random.Generator, max_concepts: int = 12, max_edges: int = 20) -> AmrGraph:
    """A connected DAG with re-entrancies and (label-distinct) parallel edges."""
    n = int(rng.integers(1, max_concepts + 1))
    names = [str(rng.choice(NAMES)) for _ in range(n)]
    # a random topological order keeps the graph acyclic
    rank = rng.permutation(n)
    order = np.argsort(rank)
    edges = set()
    for pos in range(1, n):
        head = int(order[int(rng.integers(0, pos))])
        edges.add((head, int(order[pos]), str(rng.choice(LABELS))))
    budget = min(max_edges, n * (n - 1) // 2 * len(LABELS))
    extra = int(rng.integers(0, max(1, budget - len(edges) + 1)))
    for _ in range(extra):
        if len(edges) >= max_edges or n < 2:
            break
        a, b = sorted(rng.choice(n, 2, replace=False), key=lambda i: rank[i])
        edges.add((int(a), int(b), str(rng.choice(LABELS))))
    return AmrGraph.build(names, sorted(edges), int(order[0]))


@st.composite
def amr_graphs(draw, max_concepts: int = 8, max_edges: int = 14):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_amr(np.random.default_rng(seed), max_concepts, max_edges)


@pytest.fixture
def boy_girl() -> AmrGraph:
    return parse_penman(BOY_GIRL)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


def perturb(rng: np.random.Generator, g: AmrGraph, edits: int = 2) -> AmrGraph:
    """A nearby graph, as a parser would produce: renamed or dropped concepts,
    dropped, added or relabeled edges, a moved root. Variables are shuffled."""
    names = list(g.names)
    edges = [e.as_tuple() for e in g.edges]
    root = g.root
    for _ in range(edits):
        kind = rng.integers(6)
        if kind == 0:
            names[int(rng.integers(len(names)))] = str(rng.choice(NAMES))
        elif kind == 1 and edges:
            edges.pop(int(rng.integers(len(edges))))
        elif kind == 2 and edges:
            i = int(rng.integers(len(edges)))
            h, d, _ = edges[i]
            edges[i] = (h, d, str(rng.choice(LABELS)))
        elif kind == 3 and len(names) > 1:
            a, b = (int(x) for x in rng.choice(len(names), 2, replace=False))
            edges.append((a, b, str(rng.choice(LABELS))))
        elif kind == 4:
            root = int(rng.integers(len(names)))
        elif kind == 5 and len(names) < 6:
            names.append(str(rng.choice(NAMES)))
            edges.append((int(rng.integers(len(names) - 1)), len(names) - 1, str(rng.choice(LABELS))))
    edges = {e for e in edges if e[0] != e[1]}
    # reattach whatever the edits cut off, then shuffle the variables
    for v in range(len(names)):
        if v not in _reachable(root, edges):
            edges.add((root, v, "mod"))
    return AmrGraph.build(names, sorted(edges), root).relabeled(list(rng.permutation(len(names))))


def _reachable(root: int, edges) -> set[int]:
    seen, stack = {root}, [root]
    while stack:
        u = stack.pop()
        for h, d, _ in edges:
            for a, b in ((h, d), (d, h)):
                if a == u and b not in seen:
                    seen.add(b)
                    stack.append(b)
    return seen


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE: list[str] = []


def acceptance(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
