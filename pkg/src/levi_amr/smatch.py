"""Smatch: triple-overlap F1 between two graphs, maximized over variable mappings.

A graph contributes one instance triple per concept, one relation triple per
edge and a single root triple. Constants are ordinary concepts, so they are
scored like instances. The best mapping is searched by hill climbing from a
relation-aware start plus random restarts; :func:`smatch_exact` enumerates all
maximal injective mappings and serves as an oracle for small graphs.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import AmrGraph

UNLABELED = "rel"
# graphs this small (|pred| * |gold| variables) also get two-variable moves
PAIR_MOVE_LIMIT = 64


class SmatchScore(NamedTuple):
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class TripleSet:
    """Triples of one graph; relation triples are kept as a multiset."""

    names: tuple[str, ...]
    relations: Counter
    root: int

    @classmethod
    def of(cls, g: AmrGraph, labeled: bool = True) -> "TripleSet":
        rel = Counter((e.label if labeled else UNLABELED, e.head, e.dependent) for e in g.edges)
        return cls(g.names, rel, g.root)

    def __len__(self) -> int:
        return len(self.names) + sum(self.relations.values()) + 1

    def triples(self) -> list[tuple[str, str, str]]:
        """Readable listing: (relation, source, target) with ``v<i>`` variables."""
        out = [("instance", f"v{i}", name) for i, name in enumerate(self.names)]
        out.append(("TOP", f"v{self.root}", "top"))
        for (label, h, d), n in sorted(self.relations.items()):
            out.extend([(label, f"v{h}", f"v{d}")] * n)
        return out


@dataclass(frozen=True)
class MatchCounts:
    matched: int
    pred_total: int
    gold_total: int

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            self.matched + other.matched, self.pred_total + other.pred_total, self.gold_total + other.gold_total
        )

    def score(self) -> SmatchScore:
        p = self.matched / self.pred_total if self.pred_total else 0.0
        r = self.matched / self.gold_total if self.gold_total else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return SmatchScore(p, r, f)


class _Problem:
    """Precomputed weights for scoring mappings from ``pred`` variables to ``gold`` variables."""

    def __init__(self, pred: TripleSet, gold: TripleSet):
        self.pred, self.gold = pred, gold
        self.n_pred, self.n_gold = len(pred.names), len(gold.names)
        self.node_weight = np.zeros((self.n_pred, self.n_gold), dtype=np.int64)
        for i, a in enumerate(pred.names):
            for j, b in enumerate(gold.names):
                self.node_weight[i, j] = (a == b) + (i == pred.root and j == gold.root)
        self.keys = list(pred.relations.items())
        self.keys_of: list[list[int]] = [[] for _ in range(self.n_pred)]
        for k, ((_, h, d), _) in enumerate(self.keys):
            self.keys_of[h].append(k)
            if d != h:
                self.keys_of[d].append(k)

    def relation_match(self, k: int, mapping: Sequence[int]) -> int:
        (label, h, d), count = self.keys[k]
        mh, md = mapping[h], mapping[d]
        if mh < 0 or md < 0:
            return 0
        return min(count, self.gold.relations.get((label, mh, md), 0))

    def total(self, mapping: Sequence[int]) -> int:
        nodes = sum(int(self.node_weight[i, j]) for i, j in enumerate(mapping) if j >= 0)
        return nodes + sum(self.relation_match(k, mapping) for k in range(len(self.keys)))

    def delta(self, mapping: list[int], changes: dict[int, int]) -> int:
        """Score change if the variables in ``changes`` were remapped."""
        touched = set()
        before = 0
        for i, j in changes.items():
            touched.update(self.keys_of[i])
            before += int(self.node_weight[i, mapping[i]]) if mapping[i] >= 0 else 0
        before += sum(self.relation_match(k, mapping) for k in touched)
        saved = {i: mapping[i] for i in changes}
        for i, j in changes.items():
            mapping[i] = j
        after = sum(int(self.node_weight[i, j]) for i, j in changes.items() if j >= 0)
        after += sum(self.relation_match(k, mapping) for k in touched)
        for i, j in saved.items():
            mapping[i] = j
        return after - before

    def smart_start(self) -> list[int]:
        """Assignment maximizing name/root agreement plus label-compatible incident relations."""
        if self.n_gold == 0:
            return [-1] * self.n_pred
        out_labels = [Counter() for _ in range(self.n_gold)]
        in_labels = [Counter() for _ in range(self.n_gold)]
        for (label, h, d), n in self.gold.relations.items():
            out_labels[h][label] += n
            in_labels[d][label] += n
        weight = self.node_weight.astype(float)
        for (label, h, d), n in self.keys:
            for j in range(self.n_gold):
                weight[h, j] += 0.5 * min(n, out_labels[j][label])
                weight[d, j] += 0.5 * min(n, in_labels[j][label])
        rows, cols = linear_sum_assignment(weight, maximize=True)
        mapping = [-1] * self.n_pred
        for i, j in zip(rows, cols):
            mapping[int(i)] = int(j)
        return mapping

    def random_start(self, rng: np.random.Generator) -> list[int]:
        """Random injective mapping that prefers targets with a matching name."""
        mapping = [-1] * self.n_pred
        free = set(range(self.n_gold))
        for i in rng.permutation(self.n_pred):
            if not free:
                break
            options = sorted(j for j in free if self.node_weight[i, j] > 0) or sorted(free)
            j = int(rng.choice(options))
            mapping[int(i)] = j
            free.discard(j)
        return mapping

    def climb(self, mapping: list[int]) -> int:
        """Best-improvement hill climbing with move and swap operations."""
        score = self.total(mapping)
        while True:
            best_gain, best_change = 0, None
            used = set(mapping)
            for i in range(self.n_pred):
                for j in itertools.chain(range(self.n_gold), (-1,)):
                    if j == mapping[i] or (j >= 0 and j in used):
                        continue
                    gain = self.delta(mapping, {i: j})
                    if gain > best_gain:
                        best_gain, best_change = gain, {i: j}
            for i1 in range(self.n_pred):
                for i2 in range(i1 + 1, self.n_pred):
                    if mapping[i1] == mapping[i2]:
                        continue
                    change = {i1: mapping[i2], i2: mapping[i1]}
                    gain = self.delta(mapping, change)
                    if gain > best_gain:
                        best_gain, best_change = gain, change
            if best_change is None and self.n_pred * self.n_gold <= PAIR_MOVE_LIMIT:
                best_gain, best_change = self._best_pair_move(mapping)
            if best_change is None:
                return score
            for i, j in best_change.items():
                mapping[i] = j
            score += best_gain


    def _best_pair_move(self, mapping: list[int]) -> tuple[int, dict[int, int] | None]:
        """Remap two variables at once, or rotate the targets of three.

        These escape local optima that single moves and swaps cannot leave.
        """
        best_gain, best_change = 0, None
        targets = list(range(self.n_gold)) + [-1]
        for i1, i2 in itertools.combinations(range(self.n_pred), 2):
            others = {mapping[i] for i in range(self.n_pred) if i not in (i1, i2) and mapping[i] >= 0}
            for j1 in targets:
                if j1 in others:
                    continue
                for j2 in targets:
                    if j2 in others or (j2 == j1 and j2 >= 0):
                        continue
                    gain = self.delta(mapping, {i1: j1, i2: j2})
                    if gain > best_gain:
                        best_gain, best_change = gain, {i1: j1, i2: j2}
        for i1, i2, i3 in itertools.combinations(range(self.n_pred), 3):
            a, b, c = mapping[i1], mapping[i2], mapping[i3]
            for change in ({i1: b, i2: c, i3: a}, {i1: c, i2: a, i3: b}):
                gain = self.delta(mapping, change)
                if gain > best_gain:
                    best_gain, best_change = gain, change
        return best_gain, best_change


def match_counts(
    pred: AmrGraph, gold: AmrGraph, restarts: int = 4, seed: int = 0, labeled: bool = True
) -> MatchCounts:
    """Best triple overlap found by hill climbing, with the triple totals."""
    problem = _Problem(TripleSet.of(pred, labeled), TripleSet.of(gold, labeled))
    rng = np.random.default_rng(seed)
    best = problem.climb(problem.smart_start())
    for _ in range(restarts):
        best = max(best, problem.climb(problem.random_start(rng)))
    return MatchCounts(best, len(problem.pred), len(problem.gold))


def exact_match_counts(pred: AmrGraph, gold: AmrGraph, labeled: bool = True) -> MatchCounts:
    """Exhaustive search over maximal injective mappings; exponential, for small graphs only."""
    problem = _Problem(TripleSet.of(pred, labeled), TripleSet.of(gold, labeled))
    n_pred, n_gold = problem.n_pred, problem.n_gold
    best = 0
    if n_pred <= n_gold:
        for targets in itertools.permutations(range(n_gold), n_pred):
            best = max(best, problem.total(targets))
    else:
        for sources in itertools.permutations(range(n_pred), n_gold):
            mapping = [-1] * n_pred
            for j, i in enumerate(sources):
                mapping[i] = j
            best = max(best, problem.total(mapping))
    return MatchCounts(best, len(problem.pred), len(problem.gold))


def smatch(pred: AmrGraph, gold: AmrGraph, restarts: int = 4, seed: int = 0) -> SmatchScore:
    return match_counts(pred, gold, restarts, seed).score()


def smatch_unlabeled(pred: AmrGraph, gold: AmrGraph, restarts: int = 4, seed: int = 0) -> float:
    """F1 after replacing every relation label by one dummy label."""
    return match_counts(pred, gold, restarts, seed, labeled=False).score().f1


def smatch_exact(pred: AmrGraph, gold: AmrGraph, labeled: bool = True) -> SmatchScore:
    return exact_match_counts(pred, gold, labeled).score()


def corpus_smatch(
    pairs: Iterable[tuple[AmrGraph, AmrGraph]], restarts: int = 4, seed: int = 0, labeled: bool = True
) -> SmatchScore:
    """Micro-averaged score: triple counts are summed over all pairs before dividing."""
    total = MatchCounts(0, 0, 0)
    for pred, gold in pairs:
        total = total + match_counts(pred, gold, restarts, seed, labeled)
    return total.score()
