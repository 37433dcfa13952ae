"""Text/graph encoders, the graph transformer and the node, arc and biaffine decoders.

Three decoder variants share the encoders:

* ``nd-bd-bd``: node decoder for concepts, biaffine decoder for arcs and labels;
* ``nd-ad-bd``: node decoder, arcs from max-pooled attention, biaffine labels;
* ``nd-ad-lv``: node decoder over concepts *and* labels of the Levi graph,
  arcs from max-pooled attention, no biaffine decoder at all.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import tensor as T
from .corpus import END, LABEL_PREFIX, PAD, ROOT, SENTINEL, UNK, OracleStep, Sentence, Vocabulary, vocab_key
from .graph import AmrGraph, Entry, Mode, NodeKind, NodeSequence, restore
from .graph.types import is_reversed
from .nn import CharCNN, Embedding, LayerNorm, Linear, FeedForward, Module, TransformerLayer, sinusoidal_positions, xavier
from .tensor import Parameter, Tensor


class Variant(str, enum.Enum):
    ND_BD_BD = "nd-bd-bd"
    ND_AD_BD = "nd-ad-bd"
    ND_AD_LV = "nd-ad-lv"

    @classmethod
    def coerce(cls, value: "Variant | str") -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown variant {value!r}; expected one of {names}") from None

    @property
    def mode(self) -> Mode:
        return Mode.LEVI if self is Variant.ND_AD_LV else Mode.CONCEPTS

    @property
    def uses_biaffine(self) -> bool:
        return self is not Variant.ND_AD_LV

    @property
    def attention_arcs(self) -> bool:
        return self is not Variant.ND_BD_BD


@dataclass
class ParserConfig:
    """Model dimensions and decoding switches; defaults are the full-size settings."""

    variant: str = Variant.ND_AD_LV.value
    hidden_size: int = 512
    heads: int = 8
    text_layers: int = 4
    graph_layers: int = 2
    decoder_layers: int = 2
    ffn_size: int = 1024
    decoder_ffn_size: int = 1024
    biaffine_size: int = 100
    word_dim: int = 300
    lemma_dim: int = 300
    pos_dim: int = 32
    ner_dim: int = 16
    concept_dim: int = 300
    char_dim: int = 32
    char_filters: int = 256
    char_ngram: int = 3
    char_output: int = 128
    arc_threshold: float = 0.5
    max_decode_len: int = 200

    def __post_init__(self):
        self.variant = Variant.coerce(self.variant).value
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type == "int" and (not isinstance(value, (int, np.integer)) or value < 1):
                raise ValueError(f"{f.name} must be a positive integer, got {value!r}")
        if self.hidden_size % self.heads:
            raise ValueError(f"hidden_size {self.hidden_size} is not divisible by {self.heads} heads")
        if not 0.0 < self.arc_threshold < 1.0:
            raise ValueError("arc_threshold must lie in (0, 1)")

    @property
    def kind(self) -> Variant:
        return Variant(self.variant)

    @classmethod
    def toy(cls, **overrides) -> "ParserConfig":
        """Desk-scale dimensions used by the tests and the bundled toy corpus."""
        values = dict(
            hidden_size=64,
            heads=4,
            text_layers=1,
            graph_layers=1,
            decoder_layers=2,
            ffn_size=128,
            decoder_ffn_size=128,
            biaffine_size=32,
            word_dim=32,
            lemma_dim=16,
            pos_dim=8,
            ner_dim=8,
            concept_dim=32,
            char_dim=8,
            char_filters=16,
            char_output=16,
            max_decode_len=60,
        )
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ParserConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "ParserConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


# ----------------------------------------------------------------------------
# numpy-side inputs


@dataclass
class SentenceInputs:
    """Index arrays for w_0..w_n and the copy candidates of one sentence."""

    words: np.ndarray
    lemmas: np.ndarray
    pos: np.ndarray
    ner: np.ndarray
    chars: list[list[int]]
    copy_tokens: list[str]
    token_map: np.ndarray
    copy_lemmas: list[str]
    lemma_map: np.ndarray
    lemma_valid: np.ndarray

    @property
    def n(self) -> int:
        return len(self.words) - 1


def prepare_sentence(sentence: Sentence, vocab: Vocabulary) -> SentenceInputs:
    toks = sentence.tokens
    words = np.array([vocab.words.index(ROOT)] + [vocab.words.index(t.token) for t in toks])
    lemmas = np.array([vocab.lemmas.index(ROOT)] + [vocab.lemmas.index(t.lemma) for t in toks])
    pos = np.array([vocab.pos.index(ROOT)] + [vocab.pos.index(t.pos) for t in toks])
    ner = np.array([vocab.ner.index(ROOT)] + [vocab.ner.index(t.ner) for t in toks])
    chars = [[vocab.chars.index(ROOT)]] + [[vocab.chars.index(c) for c in t.token] for t in toks]
    copy_tokens = list(dict.fromkeys(t.token for t in toks))
    token_map = np.array([[1.0 if t.token == w else 0.0 for w in copy_tokens] for t in toks])
    lemma_valid = np.array([t.lemma != SENTINEL for t in toks])
    copy_lemmas = list(dict.fromkeys(t.lemma for t in toks if t.lemma != SENTINEL))
    lemma_map = np.array([[1.0 if t.lemma == l else 0.0 for l in copy_lemmas] for t in toks]).reshape(len(toks), -1)
    return SentenceInputs(words, lemmas, pos, ner, chars, copy_tokens, token_map, copy_lemmas, lemma_map, lemma_valid)


@dataclass
class NodeInputs:
    ids: np.ndarray
    chars: list[list[int]]


def prepare_nodes(entries: Sequence[Entry], vocab: Vocabulary) -> NodeInputs:
    ids, chars = [], []
    for e in entries:
        key = vocab_key(e)
        ids.append(vocab.concepts.index(key))
        chars.append([vocab.chars.index(ROOT)] if e.kind is NodeKind.ROOT else [vocab.chars.index(c) for c in e.name])
    return NodeInputs(np.array(ids), chars)


def candidate_keys(inputs: SentenceInputs, vocab: Vocabulary) -> list[tuple[str, str]]:
    """The candidate list X = C ⌢ W ⌢ L as (source, vocabulary key) pairs."""
    return (
        [("C", k) for k in vocab.concepts.itos]
        + [("W", w) for w in inputs.copy_tokens]
        + [("L", l) for l in inputs.copy_lemmas]
    )


def gold_positions(step: OracleStep, inputs: SentenceInputs, vocab: Vocabulary) -> list[int]:
    """Indices of X whose candidate equals the gold target of ``step``."""
    out = []
    if step.concept_index is not None:
        out.append(step.concept_index)
    offset = len(vocab.concepts)
    if step.kind is NodeKind.CONCEPT and step.name != END:
        if step.name in inputs.copy_tokens:
            out.append(offset + inputs.copy_tokens.index(step.name))
        if step.name in inputs.copy_lemmas:
            out.append(offset + len(inputs.copy_tokens) + inputs.copy_lemmas.index(step.name))
    return out


# ----------------------------------------------------------------------------
# outputs


@dataclass
class AttentionOutput:
    """Final-layer attention of the graph transformer for a batch of query steps.

    ``alpha``: (h, steps, n + m + 1) per-head distributions over
    [w_1..w_n, v_0..v_m]; ``beta_plus``: (steps, d) node embeddings;
    ``alpha_token``: (steps, n) first head's token slice; ``alpha_arc``:
    (steps, m + 1) head-wise maximum over the node slice.
    """

    alpha: Tensor
    beta_plus: Tensor
    alpha_token: Tensor
    alpha_arc: Tensor
    heads_beta: Tensor | None = None


@dataclass
class NodeDecoderOutput:
    gates: Tensor
    o_node: Tensor
    candidates: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class BiaffineOutput:
    """``arc_scores``: (steps, m) logits, ``o_arc`` = sigmoid of them;
    ``rel_log``: (steps, m, |R|) log-softmax, ``o_rel`` its exponent."""

    arc_scores: Tensor
    rel_log: Tensor

    @property
    def o_arc(self) -> np.ndarray:
        return 0.5 * (1.0 + np.tanh(0.5 * self.arc_scores.data))

    @property
    def o_rel(self) -> np.ndarray:
        return np.exp(self.rel_log.data)


# ----------------------------------------------------------------------------
# modules


class TextEncoder(Module):
    def __init__(self, rng, config: ParserConfig, vocab: Vocabulary):
        c = config
        self.words = Embedding(rng, len(vocab.words), c.word_dim)
        self.lemmas = Embedding(rng, len(vocab.lemmas), c.lemma_dim)
        self.pos = Embedding(rng, len(vocab.pos), c.pos_dim)
        self.ner = Embedding(rng, len(vocab.ner), c.ner_dim)
        self.chars = CharCNN(rng, len(vocab.chars), c.char_dim, c.char_filters, c.char_ngram, c.char_output)
        width = c.word_dim + c.lemma_dim + c.pos_dim + c.ner_dim + c.char_output
        self.projection = Linear(rng, width, c.hidden_size)
        self.layers = [TransformerLayer(rng, c.hidden_size, c.heads, c.ffn_size) for _ in range(c.text_layers)]

    def __call__(self, inputs: SentenceInputs) -> Tensor:
        features = T.concat(
            [
                self.words(inputs.words),
                self.lemmas(inputs.lemmas),
                self.pos(inputs.pos),
                self.ner(inputs.ner),
                self.chars(inputs.chars),
            ],
            axis=-1,
        )
        x = self.projection(features)
        x = x + sinusoidal_positions(x.shape[0], x.shape[1]).astype(x.data.dtype)
        for layer in self.layers:
            x = layer(x)
        return x


class GraphEncoder(Module):
    """Causal transformer over the node prefix, so row ``i`` only sees ``v_0..v_i``."""

    def __init__(self, rng, config: ParserConfig, vocab: Vocabulary):
        c = config
        self.concepts = Embedding(rng, len(vocab.concepts), c.concept_dim)
        self.chars = CharCNN(rng, len(vocab.chars), c.char_dim, c.char_filters, c.char_ngram, c.char_output)
        self.projection = Linear(rng, c.concept_dim + c.char_output, c.hidden_size)
        self.layers = [TransformerLayer(rng, c.hidden_size, c.heads, c.ffn_size) for _ in range(c.graph_layers)]

    def __call__(self, nodes: NodeInputs) -> Tensor:
        x = self.projection(T.concat([self.concepts(nodes.ids), self.chars(nodes.chars)], axis=-1))
        x = x + sinusoidal_positions(x.shape[0], x.shape[1]).astype(x.data.dtype)
        causal = np.tril(np.ones((x.shape[0], x.shape[0]), dtype=bool))
        for layer in self.layers:
            x = layer(x, causal)
        return x


class GraphAttentionLayer(Module):
    """One layer of the decoder's multi-head attention.

    Each head has full-width projections (d x d); scores are scaled by 1/sqrt(d)
    and the concatenated head outputs are mapped back by a (h*d) x d matrix.
    """

    def __init__(self, rng, dim: int, heads: int, ffn: int | None):
        self.heads = heads
        self.w_query = Parameter("", xavier(rng, dim, dim, (dim, heads * dim)))
        self.w_key = Parameter("", xavier(rng, dim, dim, (dim, heads * dim)))
        self.w_value = Parameter("", xavier(rng, dim, dim, (dim, heads * dim)))
        self.w_merge = Parameter("", xavier(rng, heads * dim, dim))
        if ffn is not None:
            self.norm1 = LayerNorm(dim)
            self.ffn = FeedForward(rng, dim, ffn)
            self.norm2 = LayerNorm(dim)

    def attend(self, query: Tensor, memory: Tensor, mask: np.ndarray):
        steps, dim = query.shape
        size = memory.shape[0]
        h = self.heads
        q = T.transpose((query @ self.w_query).reshape(steps, h, dim), (1, 0, 2))
        k = T.transpose((memory @ self.w_key).reshape(size, h, dim), (1, 0, 2))
        v = T.transpose((memory @ self.w_value).reshape(size, h, dim), (1, 0, 2))
        alpha = T.softmax((q @ T.transpose(k, (0, 2, 1))) * (1.0 / np.sqrt(dim)), axis=-1, mask=mask[None])
        beta = alpha @ v
        merged = T.transpose(beta, (1, 0, 2)).reshape(steps, h * dim)
        return alpha, beta, merged @ self.w_merge

    def refine(self, query: Tensor, beta_plus: Tensor) -> Tensor:
        x = self.norm1(query + beta_plus)
        return self.norm2(x + self.ffn(x))


class GraphTransformer(Module):
    def __init__(self, rng, config: ParserConfig):
        c = config
        self.layers = [
            GraphAttentionLayer(rng, c.hidden_size, c.heads, c.decoder_ffn_size if i < c.decoder_layers - 1 else None)
            for i in range(c.decoder_layers)
        ]

    def __call__(self, text: Tensor, nodes: Tensor, limits: Sequence[int]) -> AttentionOutput:
        """Attend from the target-token query over [w_1..w_n, v_0..v_m].

        ``limits[r]`` is the last node index visible to query row ``r``; in
        teacher forcing row ``r`` predicts entry ``r + 1``.
        """
        n = text.shape[0] - 1
        m1 = nodes.shape[0]
        limits = np.asarray(limits)
        memory = T.concat([text[1:], nodes], axis=0)
        mask = np.ones((len(limits), n + m1), dtype=bool)
        mask[:, n:] = np.arange(m1)[None, :] <= limits[:, None]
        query = text[0:1] * np.ones((len(limits), 1), dtype=text.data.dtype)
        for i, layer in enumerate(self.layers):
            alpha, beta, beta_plus = layer.attend(query, memory, mask)
            if i < len(self.layers) - 1:
                query = layer.refine(query, beta_plus)
        return AttentionOutput(
            alpha=alpha,
            beta_plus=beta_plus,
            alpha_token=alpha[0, :, :n],
            alpha_arc=T.max_over(alpha[:, :, n:], axis=0),
            heads_beta=beta,
        )


class NodeDecoder(Module):
    """Gated mixture of concept generation and copying from tokens and lemmas."""

    def __init__(self, rng, config: ParserConfig, vocab: Vocabulary):
        d = config.hidden_size
        self.w_gate = Parameter("", xavier(rng, d, 3))
        self.w_generate = Parameter("", xavier(rng, d, len(vocab.concepts)))
        never = [vocab.concepts.index(s) for s in (PAD, ROOT)]
        self.generate_mask = np.ones(len(vocab.concepts), dtype=bool)
        self.generate_mask[never] = False

    def __call__(self, attn: AttentionOutput, inputs: SentenceInputs) -> NodeDecoderOutput:
        beta = attn.beta_plus
        has_lemmas = len(inputs.copy_lemmas) > 0
        gates = T.softmax(beta @ self.w_gate, axis=-1, mask=np.array([True, True, has_lemmas]))
        generate = T.softmax(beta @ self.w_generate, axis=-1, mask=self.generate_mask[None])
        a = attn.alpha_token
        # the first head's token slice is renormalized over the tokens before copying
        a_tokens = a * T.reciprocal(T.sum_(a, axis=1, keepdims=True))
        parts = [gates[:, 0:1] * generate, gates[:, 1:2] * (a_tokens @ inputs.token_map)]
        if has_lemmas:
            a_valid = a * inputs.lemma_valid.astype(a.data.dtype)
            a_lemmas = a_valid * T.reciprocal(T.sum_(a_valid, axis=1, keepdims=True))
            parts.append(gates[:, 2:3] * (a_lemmas @ inputs.lemma_map))
        return NodeDecoderOutput(gates, T.concat(parts, axis=1))


class BiaffineDecoder(Module):
    """Deep biaffine scorer: the target embedding is the head, earlier nodes the dependents."""

    def __init__(self, rng, config: ParserConfig, vocab: Vocabulary):
        d, b = config.hidden_size, config.biaffine_size
        self.arc_head = Linear(rng, d, b)
        self.arc_dep = Linear(rng, d, b)
        self.rel_head = Linear(rng, d, b)
        self.rel_dep = Linear(rng, d, b)
        self.u_arc = Parameter("", xavier(rng, b + 1, b + 1))
        self.u_rel = Parameter("", xavier(rng, b + 1, b + 1, (max(len(vocab.relations), 1), b + 1, b + 1)))

    @staticmethod
    def _augment(x: Tensor) -> Tensor:
        return T.concat([x, np.ones((x.shape[0], 1), dtype=x.data.dtype)], axis=1)

    def __call__(self, beta_plus: Tensor, dependents: Tensor) -> BiaffineOutput:
        steps, m = beta_plus.shape[0], dependents.shape[0]
        if m == 0:
            dtype = beta_plus.data.dtype
            return BiaffineOutput(
                Tensor(np.zeros((steps, 0), dtype=dtype)), Tensor(np.zeros((steps, 0, self.u_rel.shape[0]), dtype=dtype))
            )
        head = self._augment(T.gelu(self.arc_head(beta_plus)))
        dep = self._augment(T.gelu(self.arc_dep(dependents)))
        arc_scores = head @ self.u_arc @ T.transpose(dep)
        rhead = self._augment(T.gelu(self.rel_head(beta_plus)))
        rdep = self._augment(T.gelu(self.rel_dep(dependents)))
        rel = rhead.reshape(1, steps, -1) @ self.u_rel @ T.transpose(rdep)
        rel_log = T.log_softmax(T.transpose(rel, (1, 2, 0)), axis=-1)
        return BiaffineOutput(arc_scores, rel_log)


@dataclass
class StepOutputs:
    attention: AttentionOutput
    nodes: NodeDecoderOutput
    biaffine: BiaffineOutput | None


class Parser(Module):
    """All parameters of one decoder variant."""

    def __init__(self, config: ParserConfig, vocab: Vocabulary, seed: int = 0):
        if vocab.mode is not config.kind.mode:
            raise ValueError(f"vocabulary built for {vocab.mode.value} mode cannot serve variant {config.variant}")
        rng = np.random.default_rng(seed)
        self.config = config
        self.vocab = vocab
        self.text_encoder = TextEncoder(rng, config, vocab)
        self.graph_encoder = GraphEncoder(rng, config, vocab)
        self.graph_transformer = GraphTransformer(rng, config)
        self.node_decoder = NodeDecoder(rng, config, vocab)
        self.biaffine = BiaffineDecoder(rng, config, vocab) if config.kind.uses_biaffine else None
        self.assign_names()

    @property
    def variant(self) -> Variant:
        return self.config.kind

    def encode_text(self, inputs: SentenceInputs) -> Tensor:
        return self.text_encoder(inputs)

    def encode_graph(self, nodes: NodeInputs) -> Tensor:
        return self.graph_encoder(nodes)

    def forward(self, inputs: SentenceInputs, nodes: NodeInputs, limits: Sequence[int] | None = None, text=None):
        """Run every decoder for the query rows in ``limits`` (default: one per prefix)."""
        text = self.encode_text(inputs) if text is None else text
        node_states = self.encode_graph(nodes)
        if limits is None:
            limits = np.arange(node_states.shape[0])
        attn = self.graph_transformer(text, node_states, limits)
        node_out = self.node_decoder(attn, inputs)
        biaffine = self.biaffine(attn.beta_plus, node_states[1:]) if self.biaffine is not None else None
        return StepOutputs(attn, node_out, biaffine)


def graph_attention(parser: Parser, text: Tensor, nodes: Tensor) -> AttentionOutput:
    """Attention output for predicting the node after ``v_0..v_m`` (single query)."""
    return parser.graph_transformer(text, nodes, [nodes.shape[0] - 1])


def node_decode(parser: Parser, attn: AttentionOutput, inputs: SentenceInputs) -> NodeDecoderOutput:
    out = parser.node_decoder(attn, inputs)
    out.candidates = candidate_keys(inputs, parser.vocab)
    return out


def biaffine_decode(parser: Parser, beta_plus: Tensor, dependents: Tensor) -> BiaffineOutput:
    if parser.biaffine is None:
        raise ValueError("the Levi-graph variant has no biaffine decoder")
    return parser.biaffine(beta_plus, dependents)


# ----------------------------------------------------------------------------
# decoding


@dataclass
class DecodeState:
    sentence: Sentence
    inputs: SentenceInputs
    text: Tensor
    entries: list[Entry] = field(default_factory=lambda: [Entry(NodeKind.ROOT, ROOT)])
    arcs: list[frozenset[int]] = field(default_factory=lambda: [frozenset()])
    labels: list[dict[int, tuple[str, ...]]] = field(default_factory=lambda: [{}])
    token_attention: list[np.ndarray] = field(default_factory=list)
    arc_attention: list[np.ndarray] = field(default_factory=list)
    repairs: list[str] = field(default_factory=list)

    @property
    def concept_positions(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.kind is NodeKind.CONCEPT]


@dataclass
class StepPrediction:
    entry: Entry | None
    arcs: frozenset[int]
    labels: dict[int, tuple[str, ...]]
    arc_scores: np.ndarray

    @property
    def finished(self) -> bool:
        return self.entry is None


def start_decoding(parser: Parser, sentence: Sentence) -> DecodeState:
    inputs = prepare_sentence(sentence, parser.vocab)
    return DecodeState(sentence, inputs, parser.encode_text(inputs))


def threshold_arcs(scores: np.ndarray, allowed: Sequence[int], threshold: float) -> set[int]:
    """Indices in ``allowed`` whose score reaches ``threshold``."""
    return {j for j in allowed if scores[j] >= threshold}


def _choose_node(parser: Parser, state: DecodeState, o_node: np.ndarray, candidates) -> Entry | None:
    vocab = parser.vocab
    n_concepts = len(state.concept_positions)
    order = np.argsort(-o_node, kind="stable")
    for idx in order:
        source, key = candidates[idx]
        if source == "C":
            if key in (PAD, ROOT, UNK):
                continue
            if key == END:
                if n_concepts == 0:
                    continue
                return None
            if vocab.is_label(key):
                if n_concepts < 2:
                    continue
                return Entry(NodeKind.LABEL, key[len(LABEL_PREFIX) :])
        return Entry(NodeKind.CONCEPT, key)
    return None


def decode_step(parser: Parser, state: DecodeState) -> StepPrediction:
    """Predict the next node with its arcs (and labels for biaffine variants).

    Arcs point from the new node to earlier entries. A returned entry of
    ``None`` means END was predicted.
    """
    config = parser.config
    variant = parser.variant
    nodes = prepare_nodes(state.entries, parser.vocab)
    node_states = parser.encode_graph(nodes)
    attn = graph_attention(parser, state.text, node_states)
    node_out = node_decode(parser, attn, state.inputs)
    o_node = node_out.o_node.data[0]
    arc_alpha = attn.alpha_arc.data[0]
    state.token_attention.append(attn.alpha_token.data[0].copy())
    state.arc_attention.append(arc_alpha.copy())
    entry = _choose_node(parser, state, o_node, node_out.candidates)
    if entry is None:
        return StepPrediction(None, frozenset(), {}, arc_alpha)

    earlier = state.concept_positions
    if variant.mode is Mode.LEVI:
        if entry.kind is not NodeKind.LABEL:
            return StepPrediction(entry, frozenset(), {}, arc_alpha)
        arcs = threshold_arcs(arc_alpha, earlier, config.arc_threshold)
        for j in sorted(earlier, key=lambda j: (-arc_alpha[j], -j)):
            if len(arcs) >= 2:
                break
            arcs.add(j)
        return StepPrediction(entry, frozenset(arcs), {}, arc_alpha)

    if not earlier:
        return StepPrediction(entry, frozenset(), {}, arc_alpha)
    biaffine = parser.biaffine(attn.beta_plus, node_states[1:])
    if variant.attention_arcs:
        scores = arc_alpha
    else:
        # o_arc column c scores node c + 1
        scores = np.concatenate([[0.0], biaffine.o_arc[0]])
    arcs = threshold_arcs(scores, earlier, config.arc_threshold)
    if not arcs:
        best = max(earlier, key=lambda j: (scores[j], j))
        arcs = {best}
        state.repairs.append(f"step {len(state.entries)}: no arc above threshold; attached to entry {best}")
    rel = biaffine.o_rel[0]
    relations = parser.vocab.relations.itos
    labels = {j: (relations[int(np.argmax(rel[j - 1]))],) for j in arcs}
    return StepPrediction(entry, frozenset(arcs), labels, scores)


# ----------------------------------------------------------------------------
# parameter accounting


@dataclass(frozen=True)
class VocabSizes:
    words: int
    lemmas: int
    pos: int
    ner: int
    chars: int
    concepts: int
    relations: int

    @classmethod
    def of(cls, vocab: Vocabulary) -> "VocabSizes":
        return cls(
            len(vocab.words),
            len(vocab.lemmas),
            len(vocab.pos),
            len(vocab.ner),
            len(vocab.chars),
            len(vocab.concepts),
            len(vocab.relations),
        )


def count_parameters(config: ParserConfig, sizes: VocabSizes | Vocabulary) -> dict[str, int]:
    """Closed-form parameter counts per component.

    ``decoder`` is the node decoder plus the biaffine decoder (the attention
    arc decoder has no parameters of its own).
    """
    if isinstance(sizes, Vocabulary):
        sizes = VocabSizes.of(sizes)
    c = config
    d, f, b = c.hidden_size, c.ffn_size, c.biaffine_size

    def char_cnn():
        return sizes.chars * c.char_dim + c.char_ngram * c.char_dim * c.char_filters + c.char_filters + (
            c.char_filters * c.char_output + c.char_output
        )

    def layer():
        attention = 4 * d * d + 3 * d
        norms = 2 * 2 * d
        ffn = d * f + f + f * d + d
        return attention + norms + ffn

    text = (
        sizes.words * c.word_dim
        + sizes.lemmas * c.lemma_dim
        + sizes.pos * c.pos_dim
        + sizes.ner * c.ner_dim
        + char_cnn()
        + (c.word_dim + c.lemma_dim + c.pos_dim + c.ner_dim + c.char_output) * d
        + d
        + c.text_layers * layer()
    )
    graph = sizes.concepts * c.concept_dim + char_cnn() + (c.concept_dim + c.char_output) * d + d + c.graph_layers * layer()
    attention_layer = 3 * d * c.heads * d + c.heads * d * d
    refine = 2 * 2 * d + d * c.decoder_ffn_size + c.decoder_ffn_size + c.decoder_ffn_size * d + d
    transformer = c.decoder_layers * attention_layer + (c.decoder_layers - 1) * refine
    node = 3 * d + d * sizes.concepts
    biaffine = 0
    if c.kind.uses_biaffine:
        biaffine = 4 * (d * b + b) + (b + 1) ** 2 + max(sizes.relations, 1) * (b + 1) ** 2
    counts = {
        "text_encoder": text,
        "graph_encoder": graph,
        "graph_transformer": transformer,
        "node_decoder": node,
        "arc_decoder": 0,
        "biaffine_decoder": biaffine,
    }
    counts["decoder"] = node + biaffine
    counts["total"] = text + graph + transformer + node + biaffine
    return counts


def decoder_reduction(config: ParserConfig, concept_sizes: VocabSizes, levi_sizes: VocabSizes) -> float:
    """Relative decoder-size saving of the Levi variant over the biaffine one."""
    biaffine = count_parameters(ParserConfig(**{**config.to_dict(), "variant": Variant.ND_BD_BD.value}), concept_sizes)
    levi = count_parameters(ParserConfig(**{**config.to_dict(), "variant": Variant.ND_AD_LV.value}), levi_sizes)
    return 1.0 - levi["decoder"] / biaffine["decoder"]


@dataclass
class ParseResult:
    graph: AmrGraph
    sequence: NodeSequence
    state: DecodeState

    @property
    def repairs(self) -> list[str]:
        return self.state.repairs


def _connect(g: AmrGraph, relation: str, repairs: list[str]) -> AmrGraph:
    """Attach every part not reachable from the root (ignoring direction) to the root."""
    missing = g.unreachable()
    if not missing:
        return g
    edges = [e.as_tuple() for e in g.edges]
    reached = set(range(len(g.concepts))) - missing
    adj = g.incident()
    for start in sorted(missing):
        if start in reached:
            continue
        edges.append((g.root, start, relation))
        repairs.append(f"concept {start} ({g.concepts[start].name}) unreachable; attached to the root as :{relation}")
        stack = [start]
        reached.add(start)
        while stack:
            u = stack.pop()
            for _, v, _ in adj[u]:
                if v not in reached:
                    reached.add(v)
                    stack.append(v)
    return AmrGraph.build(g.names, edges, g.root)


def default_relation(vocab: Vocabulary) -> str:
    for label in vocab.relations.itos:
        if not is_reversed(label):
            return label
    return "mod"


def parse_sentence(parser: Parser, sentence: Sentence) -> ParseResult:
    """Greedy decoding until END (or the length limit), then restoration and repair."""
    config = parser.config
    mode = parser.variant.mode
    with T.no_grad():
        state = start_decoding(parser, sentence)
        for _ in range(config.max_decode_len):
            step = decode_step(parser, state)
            if step.finished:
                break
            state.entries.append(step.entry)
            state.arcs.append(step.arcs)
            state.labels.append(step.labels)
        else:
            state.repairs.append(f"stopped at the length limit of {config.max_decode_len} entries")
    labels = tuple(state.labels) if mode is Mode.CONCEPTS else ()
    sequence = NodeSequence(tuple(state.entries), tuple(state.arcs), mode, labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        graph = restore(sequence, mode, state.repairs)
    graph = _connect(graph, default_relation(parser.vocab), state.repairs)
    return ParseResult(graph, sequence, state)
