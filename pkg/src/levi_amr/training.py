"""Losses, teacher-forced training and the overfit harness."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import tensor as T
from .corpus import OracleStep, Sentence, TrainingExample, Vocabulary, build_vocab, make_oracle
from .model import (
    Parser,
    ParserConfig,
    SentenceInputs,
    StepOutputs,
    Variant,
    gold_positions,
    parse_sentence,
    prepare_nodes,
    prepare_sentence,
)
from .smatch import corpus_smatch
from .tensor import Tensor

logger = logging.getLogger(__name__)

EPS = 1e-7
DIVERGENCE_LIMIT = 1e4


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes non-finite or exceeds the divergence limit."""


@dataclass
class LossBreakdown:
    node_loss: Tensor
    arc_loss: Tensor
    rel_loss: Tensor
    total: Tensor
    steps: int
    arcs: int = 0

    def values(self) -> dict[str, float]:
        return {
            "node_loss": float(self.node_loss.data),
            "arc_loss": float(self.arc_loss.data),
            "rel_loss": float(self.rel_loss.data),
            "total": float(self.total.data),
        }


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float = 1.0
    batch_size: int = 1
    seed: int = 0
    shuffle: bool = True
    eval_every: int = 10
    eval_limit: int | None = None
    target_smatch: float | None = None
    node_weight: float = 1.0
    arc_weight: float = 1.0
    rel_weight: float = 1.0
    smatch_restarts: int = 4

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("epochs, batch_size and eval_every must be positive")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ValueError("learning_rate and clip_norm must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown training keys: {sorted(unknown)}")
        return cls(**data)


def bernoulli_nll(probs: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """-sum over masked positions of y log p + (1 - y) log(1 - p), with p clamped to [EPS, 1 - EPS]."""
    p = T.clip(probs, EPS, 1.0 - EPS)
    y = targets.astype(probs.data.dtype)
    ll = T.log(p) * y + T.log(1.0 - p) * (1.0 - y)
    return -T.sum_(ll * mask.astype(probs.data.dtype))


def step_loss(
    outputs: StepOutputs,
    steps: Sequence[OracleStep],
    inputs: SentenceInputs,
    vocab: Vocabulary,
    variant: Variant | str,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> LossBreakdown:
    """Summed losses over the teacher-forced steps in ``outputs``.

    Row ``r`` of every output predicts ``steps[r]`` from the prefix
    ``v_0..v_r``. The node loss is -log of the probability mass on all
    candidates equal to the gold target; the arc loss is a Bernoulli NLL on
    the max-pooled attention (attention variants) or on the biaffine arc
    probabilities; the relation loss is cross-entropy at the gold arcs.
    """
    variant = Variant.coerce(variant)
    count = len(steps)
    o_node = outputs.nodes.o_node
    dtype = o_node.data.dtype
    if o_node.shape[0] != count:
        raise T.ShapeError(f"{o_node.shape[0]} output rows for {count} oracle steps")

    gold = np.zeros(o_node.shape, dtype=dtype)
    for r, step in enumerate(steps):
        positions = gold_positions(step, inputs, vocab)
        if not positions:
            raise ValueError(f"step {r + 1} ({step.name!r}) has no candidate in the vocabulary or the sentence")
        gold[r, positions] = 1.0
    mass = T.sum_(o_node * gold, axis=1)
    node_loss = -T.sum_(T.log(T.clip(mass, EPS, 1.0)))

    width = count
    targets = np.zeros((count, width), dtype=bool)
    visible = np.tril(np.ones((count, width), dtype=bool))
    for r, step in enumerate(steps):
        targets[r, list(step.arcs)] = True
    if variant.attention_arcs:
        arc_loss = bernoulli_nll(outputs.attention.alpha_arc, targets, visible)
    else:
        # biaffine columns score nodes 1..m; the root column is never a dependent
        scores = outputs.biaffine.arc_scores
        arc_loss = bernoulli_nll(T.sigmoid(scores), targets[:, 1:], visible[:, 1:])

    rel_loss = Tensor(np.zeros((), dtype=dtype))
    arcs = 0
    if variant.uses_biaffine:
        rows, cols, labels = [], [], []
        for r, step in enumerate(steps):
            for j, names in step.relations.items():
                for name in names:
                    rows.append(r)
                    cols.append(j - 1)
                    labels.append(vocab.relations.index(name, default=None))
        arcs = len(rows)
        if rows:
            picked = outputs.biaffine.rel_log[np.array(rows), np.array(cols), np.array(labels)]
            rel_loss = -T.sum_(picked)

    wn, wa, wr = weights
    total = node_loss * wn + arc_loss * wa + rel_loss * wr
    return LossBreakdown(node_loss, arc_loss, rel_loss, total, count, arcs)


@dataclass
class PreparedExample:
    example: TrainingExample
    inputs: SentenceInputs
    steps: list[OracleStep]
    nodes: object


def prepare_examples(examples: Sequence[TrainingExample], vocab: Vocabulary) -> list[PreparedExample]:
    out = []
    for ex in examples:
        steps = make_oracle(ex, vocab)
        nodes = prepare_nodes(ex.target.entries[:-1], vocab)
        out.append(PreparedExample(ex, prepare_sentence(ex.sentence, vocab), steps, nodes))
    return out


def example_loss(parser: Parser, item: PreparedExample, weights=(1.0, 1.0, 1.0)) -> LossBreakdown:
    """Teacher-forced loss of one sentence: every prefix is one query row."""
    outputs = parser.forward(item.inputs, item.nodes)
    return step_loss(outputs, item.steps, item.inputs, parser.vocab, parser.variant, weights)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for p in params if p.trainable]
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0

    def step(self, grads: list[np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_by_global_norm(grads: list[np.ndarray], limit: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > limit:
        scale = limit / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


def evaluate(parser: Parser, sentences: Sequence[Sentence], restarts: int = 4) -> dict[str, float]:
    """Micro-averaged Smatch of greedy parses against the gold graphs."""
    pairs = [(parse_sentence(parser, s).graph, s.gold) for s in sentences]
    p, r, f = corpus_smatch(pairs, restarts=restarts)
    return {"precision": p, "recall": r, "f1": f}


def _parameter_report(parser: Parser) -> str:
    norms = sorted(((float(np.linalg.norm(p.data)), name) for name, p in parser.named_parameters()), reverse=True)
    return ", ".join(f"{name}={norm:.3g}" for norm, name in norms[:5])


@dataclass
class TrainResult:
    parser: Parser
    history: list[dict] = field(default_factory=list)
    best_smatch: float = 0.0
    epochs_run: int = 0


def train(
    examples: Sequence[TrainingExample],
    config: ParserConfig,
    train_config: TrainConfig | None = None,
    vocab: Vocabulary | None = None,
    eval_sentences: Sequence[Sentence] | None = None,
    log: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Fit a parser on ``examples`` with Adam and global-norm clipping.

    Smatch is measured every ``eval_every`` epochs (and after the last one)
    on ``eval_sentences``, defaulting to the training sentences. Training
    stops early once ``target_smatch`` is reached. Each metrics record is
    passed to ``log``; records hold no timing so reruns are bit-identical.
    """
    tc = train_config or TrainConfig()
    if not examples:
        raise ValueError("cannot train on an empty corpus")
    vocab = vocab or build_vocab(examples, config.kind.mode)
    parser = Parser(config, vocab, seed=tc.seed)
    prepared = prepare_examples(examples, vocab)
    if eval_sentences is None:
        eval_sentences = [ex.sentence for ex in examples]
    if tc.eval_limit is not None:
        eval_sentences = list(eval_sentences)[: tc.eval_limit]
    optimizer = Adam(parser.parameters(), tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps)
    rng = np.random.default_rng(tc.seed)
    weights = (tc.node_weight, tc.arc_weight, tc.rel_weight)
    result = TrainResult(parser)

    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(prepared)) if tc.shuffle else np.arange(len(prepared))
        sums = {"node_loss": 0.0, "arc_loss": 0.0, "rel_loss": 0.0, "total": 0.0}
        grad_norm = 0.0
        for start in range(0, len(order), tc.batch_size):
            batch = [prepared[i] for i in order[start : start + tc.batch_size]]
            parser.zero_grad()
            for item in batch:
                loss = example_loss(parser, item, weights)
                value = float(loss.total.data)
                if not math.isfinite(value) or value > DIVERGENCE_LIMIT:
                    raise TrainingDiverged(
                        f"epoch {epoch}: loss {value:.4g} on sentence {item.example.sentence.id!r}; "
                        f"largest parameter norms: {_parameter_report(parser)}"
                    )
                (loss.total * (1.0 / (len(batch) * loss.steps))).backward()
                for key, v in loss.values().items():
                    sums[key] += v / loss.steps
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in optimizer.params]
            grad_norm = clip_by_global_norm(grads, tc.clip_norm)
            optimizer.step(grads)
        record = {"epoch": epoch, **{k: v / len(prepared) for k, v in sums.items()}, "grad_norm": grad_norm}
        if epoch % tc.eval_every == 0 or epoch == tc.epochs:
            scores = evaluate(parser, eval_sentences, tc.smatch_restarts)
            record.update({f"smatch_{k}": v for k, v in scores.items()})
            result.best_smatch = max(result.best_smatch, scores["f1"])
        result.history.append(record)
        result.epochs_run = epoch
        if log is not None:
            log(record)
        logger.info("epoch %d: %s", epoch, record)
        if tc.target_smatch is not None and record.get("smatch_f1", -1.0) >= tc.target_smatch:
            break
    return result


# ----------------------------------------------------------------------------
# model directories

PARAMS_FILE = "params.ckpt"
CONFIG_FILE = "config.json"
VOCAB_FILE = "vocab.json"
METRICS_FILE = "metrics.jsonl"


def metrics_line(record: Mapping) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=False)


def save_model(parser: Parser, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    T.save_checkpoint(directory / PARAMS_FILE, ((name, p.data) for name, p in parser.named_parameters()))
    parser.config.save(directory / CONFIG_FILE)
    parser.vocab.save(directory / VOCAB_FILE)
    return directory


def load_model(directory: str | Path) -> Parser:
    directory = Path(directory)
    config = ParserConfig.load(directory / CONFIG_FILE)
    vocab = Vocabulary.load(directory / VOCAB_FILE)
    parser = Parser(config, vocab)
    parser.load_state_dict(T.load_checkpoint(directory / PARAMS_FILE))
    return parser
