"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

from typing import Iterable, Sequence

from .corpus import Sentence, TrainingExample, make_example
from .graph import AmrGraph, Mode


def check_graphs(X: Iterable) -> list[AmrGraph]:
    graphs = list(X)
    for i, g in enumerate(graphs):
        if not isinstance(g, AmrGraph):
            raise TypeError(f"item {i} is {type(g).__name__}, expected AmrGraph")
    return graphs


def check_sentences(X: Iterable, y: Sequence[AmrGraph] | None = None, require_gold: bool = False) -> list[Sentence]:
    """Coerce ``X`` to sentences; strings are split on whitespace, ``y`` supplies gold graphs."""
    sentences = []
    for i, item in enumerate(X):
        if isinstance(item, TrainingExample):
            item = item.sentence
        elif isinstance(item, str):
            if not item.split():
                raise ValueError(f"sentence {i} is empty")
            item = Sentence.from_tokens(item.split(), id=str(i))
        elif isinstance(item, (list, tuple)) and all(isinstance(t, str) for t in item):
            item = Sentence.from_tokens(list(item), id=str(i))
        elif not isinstance(item, Sentence):
            raise TypeError(f"item {i} is {type(item).__name__}, expected a Sentence, a string or a token list")
        sentences.append(item)
    if y is not None:
        gold = check_graphs(y)
        if len(gold) != len(sentences):
            raise ValueError(f"{len(sentences)} sentences but {len(gold)} graphs")
        sentences = [Sentence(s.tokens, g, s.id) for s, g in zip(sentences, gold)]
    if require_gold:
        missing = [s.id or str(i) for i, s in enumerate(sentences) if s.gold is None]
        if missing:
            raise ValueError(f"sentences without a gold graph: {missing[:5]}")
    if not sentences:
        raise ValueError("no sentences given")
    return sentences


def check_examples(X: Iterable, y: Sequence[AmrGraph] | None, mode: Mode) -> list[TrainingExample]:
    return [make_example(s, mode) for s in check_sentences(X, y, require_gold=True)]
