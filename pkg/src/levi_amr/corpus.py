"""Corpus ingestion, vocabularies and oracle supervision for the decoders."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .graph import AmrGraph, Mode, NodeKind, NodeSequence, PenmanRecord, linearize, read_penman, reverse_label
from .graph.types import Entry

logger = logging.getLogger(__name__)

SENTINEL = "_"
PAD, UNK, ROOT, END = "<pad>", "<unk>", "<root>", "<end>"
SPECIALS = (PAD, UNK, ROOT, END)
LABEL_PREFIX = ":"


@dataclass(frozen=True)
class TokenFeatures:
    token: str
    lemma: str = SENTINEL
    pos: str = SENTINEL
    ner: str = SENTINEL

    @property
    def chars(self) -> tuple[str, ...]:
        return tuple(self.token)


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[TokenFeatures, ...]
    gold: AmrGraph | None = None
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError(f"sentence {self.id!r} has no tokens")

    @classmethod
    def from_tokens(cls, tokens: Sequence[str], lemmas: Sequence[str] | None = None, gold=None, id="") -> "Sentence":
        lemmas = lemmas or [SENTINEL] * len(tokens)
        return cls(tuple(TokenFeatures(t, l) for t, l in zip(tokens, lemmas)), gold, id)

    @property
    def words(self) -> list[str]:
        return [t.token for t in self.tokens]

    @property
    def lemmas(self) -> list[str]:
        return [t.lemma for t in self.tokens]


def vocab_key(entry: Entry) -> str:
    """Name of a node-sequence entry inside the candidate vocabulary."""
    if entry.kind is NodeKind.LABEL:
        return LABEL_PREFIX + entry.name
    if entry.kind is NodeKind.ROOT:
        return ROOT
    return entry.name


class Vocab:
    """Dense string index with the special symbols first."""

    def __init__(self, items: Iterable[str] = (), specials: Sequence[str] = SPECIALS):
        self.specials = tuple(specials)
        self.itos: list[str] = list(self.specials)
        self.stoi: dict[str, int] = {s: i for i, s in enumerate(self.itos)}
        for item in items:
            if item in self.stoi:
                if item in self.specials:
                    raise ValueError(f"learned entry {item!r} collides with a special symbol")
                continue
            self.stoi[item] = len(self.itos)
            self.itos.append(item)

    @classmethod
    def from_counts(cls, counts: Counter, specials: Sequence[str] = SPECIALS) -> "Vocab":
        ordered = sorted((k for k in counts if k not in specials), key=lambda k: (-counts[k], k))
        return cls(ordered, specials)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, item):
        return item in self.stoi

    def __iter__(self):
        return iter(self.itos)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos and self.specials == other.specials

    def index(self, item: str, default: str | None = UNK) -> int:
        if item in self.stoi:
            return self.stoi[item]
        if default is None:
            raise KeyError(item)
        return self.stoi[default]

    @property
    def learned(self) -> list[str]:
        return self.itos[len(self.specials) :]

    def to_list(self) -> list[str]:
        return list(self.learned)


@dataclass
class Vocabulary:
    """All symbol tables a parser needs.

    ``concepts`` is the generation vocabulary: C in CONCEPTS mode, or
    C' = concepts plus every relation label and its reversed twin (stored
    with a leading ``:``) in LEVI mode. ``relations`` is the biaffine label
    inventory R.
    """

    mode: Mode
    concepts: Vocab
    relations: Vocab
    words: Vocab
    lemmas: Vocab
    pos: Vocab
    ner: Vocab
    chars: Vocab

    def is_label(self, key: str) -> bool:
        return key.startswith(LABEL_PREFIX) and key not in self.concepts.specials

    def to_dict(self) -> dict:
        out = {"mode": self.mode.value}
        for name in ("concepts", "relations", "words", "lemmas", "pos", "ner", "chars"):
            table = getattr(self, name)
            out[name] = {"specials": list(table.specials), "items": table.to_list()}
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Vocabulary":
        tables = {
            name: Vocab(data[name]["items"], tuple(data[name]["specials"]))
            for name in ("concepts", "relations", "words", "lemmas", "pos", "ner", "chars")
        }
        return cls(Mode.coerce(data["mode"]), **tables)

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class TrainingExample:
    """A sentence with its gold node sequence (END appended) and copy positions.

    ``token_copies[t]`` / ``lemma_copies[t]`` list the token positions
    (0-based over w_1..w_n) whose surface form / lemma equals target ``t``.
    """

    sentence: Sentence
    target: NodeSequence
    token_copies: tuple[tuple[int, ...], ...] = ()
    lemma_copies: tuple[tuple[int, ...], ...] = ()
    unk_targets: int = 0


@dataclass
class OracleStep:
    """Supervision for producing entry ``t`` from the prefix ``v_0..v_{t-1}``."""

    name: str
    kind: NodeKind
    concept_index: int | None
    token_positions: tuple[int, ...]
    lemma_positions: tuple[int, ...]
    arcs: tuple[int, ...]
    length: int
    relations: dict[int, tuple[str, ...]] = field(default_factory=dict)

    @property
    def arc_vector(self) -> list[int]:
        return [1 if j in self.arcs else 0 for j in range(self.length)]


def _tokens_from_metadata(meta: Mapping[str, str]) -> list[str] | None:
    if meta.get("tok"):
        return meta["tok"].split()
    if meta.get("snt"):
        return meta["snt"].split()
    return None


def read_features(path: str | Path) -> list[list[tuple[str, str, str, str]]]:
    """Blocks of ``token<TAB>lemma<TAB>pos<TAB>ner`` lines separated by blank lines."""
    blocks: list[list[tuple[str, str, str, str]]] = []
    current: list[tuple[str, str, str, str]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            if current:
                blocks.append(current)
                current = []
            continue
        cols = line.rstrip("\n").split("\t")
        cols += [SENTINEL] * (4 - len(cols))
        if len(cols) > 4:
            raise ValueError(f"{path}:{lineno}: expected 4 tab-separated columns, found {len(cols)}")
        current.append(tuple(c if c else SENTINEL for c in cols))
    if current:
        blocks.append(current)
    return blocks


def load_sentences(penman_path: str | Path, features_path: str | Path | None = None) -> list[Sentence]:
    """Sentences with gold graphs; features, when given, must align with ``# ::tok``."""
    records: list[PenmanRecord] = read_penman(penman_path)
    blocks = read_features(features_path) if features_path else []
    out: list[Sentence] = []
    for i, rec in enumerate(records):
        sid = rec.metadata.get("id", str(i))
        words = _tokens_from_metadata(rec.metadata)
        if words is None:
            logger.warning("sentence %s skipped: no '# ::tok' or '# ::snt' line", sid)
            continue
        if i < len(blocks):
            block = blocks[i]
            if len(block) != len(words) or any(b[0] != w for b, w in zip(block, words)):
                logger.warning(
                    "sentence %s skipped: %d feature rows do not align with %d tokens", sid, len(block), len(words)
                )
                continue
            tokens = tuple(TokenFeatures(w, b[1], b[2], b[3]) for w, b in zip(words, block))
        else:
            tokens = tuple(TokenFeatures(w) for w in words)
        out.append(Sentence(tokens, rec.graph, sid))
    return out


def make_example(sentence: Sentence, mode: Mode | str) -> TrainingExample:
    if sentence.gold is None:
        raise ValueError(f"sentence {sentence.id!r} has no gold graph")
    mode = Mode.coerce(mode)
    seq = linearize(sentence.gold, mode)
    entries = seq.entries + (Entry(NodeKind.CONCEPT, END),)
    labels = seq.labels + ({},) if seq.labels else ()
    target = NodeSequence(entries, seq.arcs + (frozenset(),), mode, labels)
    words, lemmas = sentence.words, sentence.lemmas
    token_copies, lemma_copies = [()], [()]
    for entry in entries[1:]:
        if entry.kind is NodeKind.CONCEPT and entry.name != END:
            token_copies.append(tuple(j for j, w in enumerate(words) if w == entry.name))
            lemma_copies.append(tuple(j for j, l in enumerate(lemmas) if l == entry.name and l != SENTINEL))
        else:
            token_copies.append(())
            lemma_copies.append(())
    return TrainingExample(sentence, target, tuple(token_copies), tuple(lemma_copies))


def load_corpus(
    penman_path: str | Path, features_path: str | Path | None = None, mode: Mode | str = Mode.LEVI
) -> list[TrainingExample]:
    """Read a Penman corpus (plus optional feature sidecar) into training examples."""
    return [make_example(s, mode) for s in load_sentences(penman_path, features_path)]


def build_vocab(examples: Sequence[TrainingExample], mode: Mode | str | None = None) -> Vocabulary:
    """Deterministic vocabularies: frequency descending, then lexicographic."""
    if not examples:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    mode = Mode.coerce(mode if mode is not None else examples[0].target.mode)
    concepts, labels, words, lemmas, pos, ner, chars = (Counter() for _ in range(7))
    for ex in examples:
        for t in ex.sentence.tokens:
            words[t.token] += 1
            lemmas[t.lemma] += 1
            pos[t.pos] += 1
            ner[t.ner] += 1
            chars.update(t.token)
        g = ex.sentence.gold
        for c in g.concepts:
            concepts[c.name] += 1
            chars.update(c.name)
        for e in g.edges:
            labels[e.label] += 1
    relations = Counter()
    for label, n in labels.items():
        relations[label] += n
        relations[reverse_label(label)] += n
    candidates = Counter(concepts)
    if mode is Mode.LEVI:
        for label, n in relations.items():
            candidates[LABEL_PREFIX + label] += n
    for label in relations:
        chars.update(label)
    return Vocabulary(
        mode=mode,
        concepts=Vocab.from_counts(candidates),
        relations=Vocab.from_counts(relations, specials=()),
        words=Vocab.from_counts(words),
        lemmas=Vocab.from_counts(lemmas),
        pos=Vocab.from_counts(pos),
        ner=Vocab.from_counts(ner),
        chars=Vocab.from_counts(chars),
    )


def make_oracle(example: TrainingExample, vocab: Vocabulary) -> list[OracleStep]:
    """Per-step supervision for steps 1..T (END included).

    Step ``t`` predicts entry ``t`` given ``v_0..v_{t-1}``; its arc vector
    has length ``t``. A target that is neither in the vocabulary nor
    copyable is mapped to UNK and counted on ``example.unk_targets``.
    """
    steps: list[OracleStep] = []
    unk = 0
    target = example.target
    for t in range(1, len(target.entries)):
        entry = target.entries[t]
        key = vocab_key(entry)
        index = vocab.concepts.stoi.get(key)
        tokens, lemmas = example.token_copies[t], example.lemma_copies[t]
        if index is None and not tokens and not lemmas:
            logger.warning("target %r of sentence %r is not resolvable; using %s", entry.name, example.sentence.id, UNK)
            index = vocab.concepts.stoi[UNK]
            unk += 1
        steps.append(
            OracleStep(
                name=entry.name,
                kind=entry.kind,
                concept_index=index,
                token_positions=tokens,
                lemma_positions=lemmas,
                arcs=tuple(sorted(target.arcs[t])),
                length=t,
                relations=dict(target.labels[t]) if target.labels else {},
            )
        )
    example.unk_targets = unk
    return steps


def corpus_stats(sentences: Sequence[Sentence]) -> dict[str, int]:
    """Counts in the schema of the data-statistics table."""
    return {
        "sentences": len(sentences),
        "tokens": sum(len(s.tokens) for s in sentences),
        "concepts": sum(len(s.gold.concepts) for s in sentences if s.gold is not None),
        "relations": sum(len(s.gold.edges) for s in sentences if s.gold is not None),
    }
