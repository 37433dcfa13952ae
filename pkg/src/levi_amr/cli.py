"""Command line: ``levi-amr <command> ...`` (or ``python -m levi_amr``)."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .corpus import Sentence, TokenFeatures, build_vocab, corpus_stats, load_corpus, load_sentences, read_features
from .graph import (
    GraphError,
    LeviGraph,
    Mode,
    PenmanError,
    PenmanRecord,
    dumps_penman,
    emit_penman,
    from_levi,
    isomorphic,
    linearize,
    parse_penman,
    read_penman,
    to_levi,
)
from .model import ParserConfig, Variant, count_parameters, parse_sentence
from .smatch import MatchCounts, match_counts
from .training import METRICS_FILE, TrainConfig, TrainingDiverged, load_model, metrics_line, save_model, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
DATA_DIR = Path(__file__).parent / "data"

log = logging.getLogger("levi_amr")


class UsageError(Exception):
    pass


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_config(args) -> tuple[ParserConfig, TrainConfig]:
    """Model and training settings from ``--config`` (JSON with optional "model"/"training" sections)."""
    model, training = {}, {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        model = dict(data.get("model", {}))
        training = dict(data.get("training", {}))
        extra = set(data) - {"model", "training", "toy"}
        if extra:
            raise UsageError(f"{args.config}: unknown sections {sorted(extra)}")
        toy = data.get("toy", False)
    else:
        toy = False
    toy = toy or getattr(args, "toy", False)
    if args.variant:
        model["variant"] = args.variant
    config = ParserConfig.toy(**model) if toy else ParserConfig(**model)
    if args.seed is not None:
        training["seed"] = args.seed
    for key in ("epochs", "eval_every", "target_smatch"):
        value = getattr(args, key, None)
        if value is not None:
            training[key] = value
    return config, TrainConfig.from_dict(training)


# ----------------------------------------------------------------------------
# commands


def cmd_transform(args) -> int:
    path = Path(args.input)
    if args.roundtrip:
        records = read_penman(path)
        mismatches = 0
        for i, rec in enumerate(records):
            g = rec.graph
            levi_ok = from_levi(to_levi(g)) == g.canonical()
            penman_ok = isomorphic(parse_penman(emit_penman(g)), g)
            if not (levi_ok and penman_ok):
                mismatches += 1
                print(f"mismatch in graph {rec.metadata.get('id', i)}", file=sys.stderr)
        _write(f"{len(records)} graphs, {mismatches} mismatches\n", args.out)
        return EXIT_OK if mismatches == 0 else EXIT_DATA
    if args.to == "levi":
        levis = [{**to_levi(r.graph).to_dict(), "metadata": r.metadata} for r in read_penman(path)]
        _write(json.dumps(levis, ensure_ascii=False, indent=1) + "\n", args.out)
    else:
        data = json.loads(path.read_text(encoding="utf-8"))
        records = [PenmanRecord(from_levi(LeviGraph.from_dict(d)), d.get("metadata", {})) for d in data]
        _write(dumps_penman(records), args.out)
    return EXIT_OK


def cmd_linearize(args) -> int:
    mode = Mode.coerce(args.mode) if args.mode else Variant.coerce(args.variant or "nd-ad-lv").mode
    lines = []
    for rec in read_penman(args.input):
        seq = linearize(rec.graph, mode)
        lines.append(json.dumps({"id": rec.metadata.get("id", ""), **seq.to_dict()}, ensure_ascii=False))
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    config, tc = _load_config(args)
    examples = load_corpus(args.train, args.features, config.kind.mode)
    if not examples:
        raise ValueError(f"{args.train}: no usable sentences")
    dev = load_sentences(args.dev, args.dev_features) if args.dev else None
    out = Path(args.out or "model")
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / METRICS_FILE
    with open(metrics_path, "w", encoding="utf-8") as fh:

        def record(entry):
            fh.write(metrics_line(entry) + "\n")
            fh.flush()
            if args.verbose:
                print(metrics_line(entry), file=sys.stderr)

        result = train(examples, config, tc, eval_sentences=dev, log=record)
    save_model(result.parser, out)
    summary = {"epochs": result.epochs_run, "best_smatch": result.best_smatch, "model": str(out)}
    print(json.dumps(summary))
    return EXIT_OK


def _input_sentences(path: str, features: str | None, text: bool) -> list[Sentence]:
    if text:
        lines = [l.split() for l in Path(path).read_text(encoding="utf-8").splitlines() if l.strip()]
        blocks = read_features(features) if features else []
        out = []
        for i, words in enumerate(lines):
            if i < len(blocks) and [b[0] for b in blocks[i]] == words:
                out.append(Sentence(tuple(TokenFeatures(*b) for b in blocks[i]), id=str(i + 1)))
            else:
                out.append(Sentence.from_tokens(words, id=str(i + 1)))
        return out
    return load_sentences(path, features)


def cmd_parse(args) -> int:
    parser = load_model(args.model)
    records = []
    for s in _input_sentences(args.input, args.features, args.text):
        result = parse_sentence(parser, s)
        meta = {"id": s.id, "tok": " ".join(s.words)}
        for note in result.repairs:
            log.info("sentence %s: %s", s.id, note)
        records.append(PenmanRecord(result.graph, meta))
    _write(dumps_penman(records), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = read_penman(args.pred)
    gold = read_penman(args.gold)
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted graphs but {len(gold)} gold graphs")
    seed = args.seed or 0
    report = {}
    for name, labeled in (("labeled", True), ("unlabeled", False)):
        total = MatchCounts(0, 0, 0)
        for p, g in zip(pred, gold):
            total = total + match_counts(p.graph, g.graph, args.restarts, seed, labeled)
        p_, r_, f_ = total.score()
        report[name] = {"precision": p_, "recall": r_, "f1": f_}
    report["graphs"] = len(gold)
    if args.json:
        _write(json.dumps(report, indent=1) + "\n", args.out)
    else:
        lines = [f"graphs: {len(gold)}"]
        for name in ("labeled", "unlabeled"):
            s = report[name]
            lines.append(f"{name:>9}  P {s['precision']:.4f}  R {s['recall']:.4f}  F1 {s['f1']:.4f}")
        _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_stats(args) -> int:
    stats = corpus_stats(load_sentences(args.input, args.features))
    text = json.dumps(stats, indent=1) + "\n"
    _write(text, args.out)
    if args.check:
        golden = json.loads(Path(args.check).read_text())
        if golden != stats:
            print(f"stats differ from {args.check}: expected {golden}", file=sys.stderr)
            return EXIT_DATA
    return EXIT_OK


def cmd_params(args) -> int:
    config, _ = _load_config(args)
    if args.vocab:
        from .corpus import Vocabulary

        vocabs = {Vocabulary.load(args.vocab).mode: Vocabulary.load(args.vocab)}
    else:
        corpus = args.corpus or str(DATA_DIR / "toy.amr")
        vocabs = {}
        for mode in (Mode.CONCEPTS, Mode.LEVI):
            vocabs[mode] = build_vocab(load_corpus(corpus, None, mode), mode)
    variants = [config.kind] if args.variant else list(Variant)
    report = {}
    for v in variants:
        if v.mode not in vocabs:
            continue
        cfg = ParserConfig(**{**config.to_dict(), "variant": v.value})
        report[v.value] = count_parameters(cfg, vocabs[v.mode])
    if not report:
        raise UsageError("the vocabulary does not match the requested variant")
    _write(json.dumps(report, indent=1) + "\n", args.out)
    return EXIT_OK


def _write_grid(path: Path, rows: list[str], cols: list[str], values: np.ndarray):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["query"] + cols)
        for name, row in zip(rows, values):
            w.writerow([name] + [f"{x:.6f}" for x in row])


def cmd_attn_dump(args) -> int:
    parser = load_model(args.model)
    sentences = _input_sentences(args.input, args.features, args.text)
    if not 1 <= args.index <= len(sentences):
        raise UsageError(f"--index must be between 1 and {len(sentences)}")
    sentence = sentences[args.index - 1]
    result = parse_sentence(parser, sentence)
    state = result.state
    out = Path(args.out or "attention")
    out.mkdir(parents=True, exist_ok=True)
    words = ["<root>"] + sentence.words
    token_attention = parser.text_encoder.layers[-1].attention.last_weights.mean(axis=0)
    _write_grid(out / "token_token.csv", words, words, token_attention)
    steps = len(state.arc_attention)
    names = [e.name for e in state.entries]
    produced = names[1:] + ["<end>"]
    node_token = np.array(state.token_attention)
    _write_grid(out / "node_token.csv", produced[:steps], sentence.words, node_token)
    # row r is the query predicting entry r + 1; it sees nodes 0..r
    node_node = np.zeros((steps, len(names)))
    for r, row in enumerate(state.arc_attention):
        node_node[r, : len(row)] = row
    _write_grid(out / "node_node.csv", [f"{r}:{n}" for r, n in enumerate(produced[:steps])], names, node_node)
    print(json.dumps({"steps": steps, "tokens": len(sentence.words), "out": str(out)}))
    return EXIT_OK


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON file with optional 'model' and 'training' sections")
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--variant", choices=[v.value for v in Variant])
    shared.add_argument("--out", help="output file or directory (default: stdout or a command-specific name)")
    shared.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="levi-amr", description="Text-to-AMR parsing with Levi-graph decoding.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", parents=[shared], help="AMR <-> Levi graph conversion")
    p.add_argument("input")
    p.add_argument("--to", choices=["levi", "amr"], default="levi")
    p.add_argument("--roundtrip", action="store_true", help="check Levi and Penman round trips")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("linearize", parents=[shared], help="emit node sequences as JSON lines")
    p.add_argument("input")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("train", parents=[shared], help="train a parser")
    p.add_argument("train")
    p.add_argument("--features")
    p.add_argument("--dev")
    p.add_argument("--dev-features")
    p.add_argument("--epochs", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--target-smatch", type=float)
    p.add_argument("--toy", action="store_true", help="use the desk-scale model dimensions")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", parents=[shared], help="parse sentences to Penman")
    p.add_argument("input", help="Penman file with '# ::tok' lines, or plain text with --text")
    p.add_argument("--model", required=True)
    p.add_argument("--features")
    p.add_argument("--text", action="store_true", help="input holds one tokenized sentence per line")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", parents=[shared], help="Smatch of predicted against gold graphs")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", parents=[shared], help="corpus counts")
    p.add_argument("input")
    p.add_argument("--features")
    p.add_argument("--check", help="golden JSON to compare against")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("params", parents=[shared], help="parameter counts per component")
    p.add_argument("--vocab", help="vocab.json of a trained model")
    p.add_argument("--corpus", help="Penman corpus to build vocabularies from (default: bundled toy corpus)")
    p.add_argument("--toy", action="store_true")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("attn-dump", parents=[shared], help="write attention grids as CSV")
    p.add_argument("input")
    p.add_argument("--model", required=True)
    p.add_argument("--features")
    p.add_argument("--text", action="store_true")
    p.add_argument("--index", type=int, default=1, help="1-based sentence index")
    p.set_defaults(func=cmd_attn_dump)
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"error[divergence]: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, PenmanError, GraphError, ValueError, KeyError) as exc:
        kind = "io" if isinstance(exc, OSError) else "format"
        print(f"error[{kind}]: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())
