"""End-to-end acceptance checks. Each test prints one PASS/FAIL line; the
lines are repeated in the pytest terminal summary under "acceptance".

Corpus-dependent parts look for the licensed AMR releases in the directories
named by LEVI_AMR_AMR2 and LEVI_AMR_AMR3 (each holding train.amr, dev.amr,
test.amr) and are skipped when those are absent.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from levi_amr import tensor as T
from levi_amr.cli import EXIT_OK, run
from levi_amr.corpus import Sentence, build_vocab, corpus_stats, load_corpus, load_sentences, make_example
from levi_amr.graph import Mode, from_levi, linearize, parse_penman, restore, to_levi
from levi_amr.model import (
    NodeInputs,
    Parser,
    ParserConfig,
    Variant,
    VocabSizes,
    count_parameters,
    decoder_reduction,
    graph_attention,
    node_decode,
    prepare_sentence,
)
from levi_amr.smatch import smatch, smatch_exact
from levi_amr.tensor import Tensor
from levi_amr.training import TrainConfig, example_loss, prepare_examples, train

from conftest import TOY_AMR, TOY_FEATURES, TOY_STATS, acceptance, perturb, random_amr
from test_model import random_instance, ref_graph_attention, ref_node_decode

VARIANTS = list(Variant)

# pinned tolerances and budgets
ROUNDTRIP_GRAPHS = 1000
ROUNDTRIP_SECONDS = 10.0
GRAD_TOLERANCE = 1e-4
GRAD_EPS = 1e-5
ORACLE_INSTANCES = 100
ORACLE_RTOL = 1e-10
SMATCH_PAIRS = 200
OVERFIT_EPOCHS = 200
OVERFIT_SECONDS = 600.0
OVERFIT_TARGET = {Variant.ND_AD_LV: 0.95, Variant.ND_BD_BD: 0.90, Variant.ND_AD_BD: 0.90}
REDUCTION_BAND = (0.35, 0.55)

# expected split counts: (sentences, tokens, concepts, relations)
RELEASE_STATS = {
    "LEVI_AMR_AMR2": {
        "train": (36521, 624750, 422655, 426712),
        "dev": (1368, 27713, 19890, 20111),
        "test": (1371, 28279, 26513, 27175),
    },
    "LEVI_AMR_AMR3": {
        "train": (55635, 965468, 656123, 667577),
        "dev": (1722, 34696, 25171, 25568),
        "test": (1898, 37225, 34903, 35572),
    },
}


def licensed_corpus(var):
    root = os.environ.get(var)
    if not root or not (Path(root) / "train.amr").is_file():
        return None
    return Path(root)


def test_roundtrip_soundness():
    rng = np.random.default_rng(2024)
    graphs = [random_amr(rng, max_concepts=12, max_edges=20) for _ in range(ROUNDTRIP_GRAPHS)]
    reentrant = sum(any(len(set(e.head for e in g.edges if e.dependent == v)) > 1 for v in range(len(g))) for g in graphs)
    parallel = sum(len({(e.head, e.dependent) for e in g.edges}) < len(g.edges) for g in graphs)
    start = time.perf_counter()
    failures = 0
    for g in graphs:
        canon = g.canonical()
        ok = from_levi(to_levi(g)) == canon
        ok &= all(restore(linearize(g, m), m) == canon for m in Mode)
        failures += not ok
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < ROUNDTRIP_SECONDS and reentrant > 0 and parallel > 0
    acceptance(
        1,
        ok,
        f"{ROUNDTRIP_GRAPHS - failures}/{ROUNDTRIP_GRAPHS} round trips ({reentrant} re-entrant, "
        f"{parallel} with parallel edges) in {elapsed:.2f}s < {ROUNDTRIP_SECONDS}s",
    )
    assert ok


def test_example_linearization(boy_girl):
    seq = linearize(boy_girl, Mode.LEVI)
    names = [e.name for e in seq.entries]
    expected = ["<root>", "want-01", "believe-01", "ARG1", "boy", "ARG1", "ARG0", "girl", "ARG0"]
    restored = restore(seq, Mode.LEVI)
    ok = names == expected and restored == boy_girl.canonical()
    acceptance(2, ok, f"Levi sequence {names[1:]}; restores to the original graph: {restored == boy_girl.canonical()}")
    assert ok


def test_gradient_fidelity():
    tokens = "the boy wants girl believe".split()
    lemmas = ["the", "boy", "want", "girl", "believe"]
    gold = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (b2 / believe-01 :ARG0 (g / girl) :ARG1 b))")
    sentence = Sentence.from_tokens(tokens, lemmas, gold=gold)
    dims = dict(hidden_size=16, heads=2, ffn_size=16, decoder_ffn_size=16, biaffine_size=8, word_dim=8,
                lemma_dim=4, pos_dim=2, ner_dim=2, concept_dim=8, char_dim=4, char_filters=4, char_output=4)
    paths = {"node": (1.0, 0.0, 0.0), "arc": (0.0, 1.0, 0.0), "rel": (0.0, 0.0, 1.0), "total": (1.0, 1.0, 1.0)}
    worst, details = 0.0, []
    for variant in VARIANTS:
        ex = make_example(sentence, variant.mode)
        vocab = build_vocab([ex])
        parser = Parser(ParserConfig.toy(variant=variant.value, **dims), vocab, seed=1)
        item = prepare_examples([ex], vocab)[0]
        # v_0..v_4 visible, so m = 4
        item.nodes = NodeInputs(item.nodes.ids[:5], item.nodes.chars[:5])
        item.steps = item.steps[:5]
        for path, weights in paths.items():
            if path == "rel" and not variant.uses_biaffine:
                continue
            err = T.grad_check(
                lambda: example_loss(parser, item, weights).total, parser.parameters(), GRAD_EPS, samples_per_param=8
            )
            worst = max(worst, err)
            details.append(f"{variant.value}/{path}={err:.1e}")
    ok = worst < GRAD_TOLERANCE
    acceptance(3, ok, f"max relative error {worst:.2e} < {GRAD_TOLERANCE} ({', '.join(details)})")
    assert ok


@pytest.fixture(scope="module")
def toy_vocabs():
    cache = {m: build_vocab(load_corpus(TOY_AMR, TOY_FEATURES, m)) for m in Mode}
    return cache.__getitem__


def test_equation_oracle(toy_vocabs):
    worst = 0.0
    for seed in range(ORACLE_INSTANCES):
        rng = np.random.default_rng(10_000 + seed)
        parser, tokens, lemmas, text, nodes = random_instance(rng, toy_vocabs)
        attn = graph_attention(parser, Tensor(text), Tensor(nodes))
        alphas, beta_plus, alpha_token, alpha_arc = ref_graph_attention(parser, text, nodes)
        out = node_decode(parser, attn, prepare_sentence(Sentence.from_tokens(tokens, lemmas), parser.vocab))
        gates, o_node = ref_node_decode(parser, alpha_token, beta_plus, tokens, lemmas)
        for got, want in [
            (attn.alpha.data[:, 0, :], alphas),
            (attn.beta_plus.data[0], beta_plus),
            (attn.alpha_arc.data[0], alpha_arc),
            (out.gates.data[0], gates),
            (out.o_node.data[0], o_node),
        ]:
            want = np.asarray(want)
            scale = np.maximum(np.abs(want), 1e-300)
            worst = max(worst, float(np.max(np.abs(got - want) / scale)))
    ok = worst < ORACLE_RTOL
    acceptance(4, ok, f"{ORACLE_INSTANCES} instances, max relative error {worst:.2e} < {ORACLE_RTOL}")
    assert ok


def test_smatch_correctness():
    rng = np.random.default_rng(77)
    agree = 0
    for _ in range(SMATCH_PAIRS):
        gold = random_amr(rng, max_concepts=6, max_edges=8)
        pred = perturb(rng, gold, int(rng.integers(1, 4)))
        agree += smatch(pred, gold).f1 == pytest.approx(smatch_exact(pred, gold).f1, abs=1e-12)
    identity = all(smatch(g, g).f1 == 1.0 for g in (random_amr(rng) for _ in range(SMATCH_PAIRS)))
    ok = agree == SMATCH_PAIRS and identity
    acceptance(5, ok, f"hill climbing = exhaustive oracle on {agree}/{SMATCH_PAIRS} pairs; smatch(g, g) = 1: {identity}")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("variant", [Variant.ND_AD_LV, Variant.ND_BD_BD, Variant.ND_AD_BD], ids=lambda v: v.value)
def test_overfit_toy_corpus(variant):
    examples = load_corpus(TOY_AMR, TOY_FEATURES, variant.mode)
    target = OVERFIT_TARGET[variant]
    start = time.perf_counter()
    result = train(
        examples,
        ParserConfig.toy(variant=variant.value),
        TrainConfig(epochs=OVERFIT_EPOCHS, eval_every=5, target_smatch=target, seed=0),
    )
    elapsed = time.perf_counter() - start
    ok = result.best_smatch >= target and elapsed <= OVERFIT_SECONDS
    acceptance(
        6,
        ok,
        f"{variant.value}: training Smatch {result.best_smatch:.4f} >= {target} after {result.epochs_run} "
        f"epochs in {elapsed:.0f}s (budget {OVERFIT_EPOCHS} epochs, {OVERFIT_SECONDS:.0f}s)",
    )
    assert ok


def test_parameter_counts(toy_vocabs):
    # every |R| >= 1 with the shipped dimensions; the concept vocabulary size does not matter
    shipped = {"default": ParserConfig(), "toy": ParserConfig.toy()}
    smaller = True
    for config in shipped.values():
        for relations in range(1, 2001):
            sizes = VocabSizes(1000, 1000, 50, 20, 100, 5000, relations)
            levi = VocabSizes(1000, 1000, 50, 20, 100, 5000 + relations, relations)
            bd = count_parameters(ParserConfig(**{**config.to_dict(), "variant": "nd-bd-bd"}), sizes)["decoder"]
            lv = count_parameters(ParserConfig(**{**config.to_dict(), "variant": "nd-ad-lv"}), levi)["decoder"]
            smaller &= lv < bd
    toy_ratio = decoder_reduction(
        ParserConfig.toy(), VocabSizes.of(toy_vocabs(Mode.CONCEPTS)), VocabSizes.of(toy_vocabs(Mode.LEVI))
    )
    detail = f"LV decoder < biaffine for default and toy dims, |R| in 1..2000: {smaller}; toy reduction {toy_ratio:.2f}"
    corpus = licensed_corpus("LEVI_AMR_AMR2")
    in_band = True
    if corpus is not None:
        vocabs = {m: build_vocab(load_corpus(corpus / "train.amr", None, m)) for m in Mode}
        ratio = decoder_reduction(ParserConfig(), VocabSizes.of(vocabs[Mode.CONCEPTS]), VocabSizes.of(vocabs[Mode.LEVI]))
        in_band = REDUCTION_BAND[0] <= ratio <= REDUCTION_BAND[1]
        detail += f"; AMR 2.0 reduction {ratio:.3f} in {REDUCTION_BAND}: {in_band}"
    else:
        detail += "; AMR 2.0 ratio not checked (licensed corpus absent)"
    ok = smaller and in_band
    acceptance(7, ok, detail)
    assert ok


def test_corpus_statistics():
    stats = corpus_stats(load_sentences(TOY_AMR, TOY_FEATURES))
    golden = json.loads(TOY_STATS.read_text())
    ok = stats == golden
    detail = f"toy corpus {stats} matches golden file: {ok}"
    for var, splits in RELEASE_STATS.items():
        corpus = licensed_corpus(var)
        if corpus is None:
            detail += f"; {var} absent, not checked"
            continue
        for split, expected in splits.items():
            s = corpus_stats(load_sentences(corpus / f"{split}.amr"))
            got = (s["sentences"], s["tokens"], s["concepts"], s["relations"])
            ok &= got == expected
            detail += f"; {var}/{split} {got} == {expected}: {got == expected}"
    acceptance(8, ok, detail)
    assert ok


def test_training_determinism(tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        args = ["train", str(TOY_AMR), "--features", str(TOY_FEATURES), "--toy", "--epochs", "3", "--eval-every", "3"]
        assert run(args + ["--seed", "11", "--out", str(out)]) == EXIT_OK
        outputs.append((out / "metrics.jsonl").read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    acceptance(9, ok, f"two seeded train runs, metrics logs bitwise identical: {ok} ({len(outputs[0])} bytes)")
    assert ok
