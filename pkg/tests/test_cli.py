import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from levi_amr import training
from levi_amr.cli import EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, run
from levi_amr.graph import dumps_penman, loads_penman, read_penman

from conftest import BOY_GIRL, TOY_AMR, TOY_FEATURES, TOY_STATS, random_amr


def small_corpus(tmp_path, count=3):
    records = read_penman(TOY_AMR)[:count]
    path = tmp_path / "small.amr"
    path.write_text(dumps_penman(records))
    return path


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    corpus = small_corpus(tmp)
    out = tmp / "model"
    assert run(["train", str(corpus), "--toy", "--epochs", "2", "--eval-every", "2", "--out", str(out)]) == EXIT_OK
    return out, corpus


def read_grid(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0][1:], [r[0] for r in rows[1:]], np.array([[float(x) for x in r[1:]] for r in rows[1:]])


def test_roundtrip_report(capsys):
    assert run(["transform", str(TOY_AMR), "--roundtrip"]) == EXIT_OK
    assert capsys.readouterr().out == "50 graphs, 0 mismatches\n"


def test_roundtrip_on_random_graphs(tmp_path, capsys):
    rng = np.random.default_rng(0)
    path = tmp_path / "random.amr"
    path.write_text(dumps_penman([random_amr(rng) for _ in range(100)]))
    assert run(["transform", str(path), "--roundtrip"]) == EXIT_OK
    assert capsys.readouterr().out == "100 graphs, 0 mismatches\n"


def test_transform_there_and_back(tmp_path):
    src = tmp_path / "bg.amr"
    src.write_text("# ::id bg\n" + BOY_GIRL + "\n")
    levi, back = tmp_path / "bg.json", tmp_path / "back.amr"
    assert run(["transform", str(src), "--to", "levi", "--out", str(levi)]) == EXIT_OK
    assert json.loads(levi.read_text())[0]["metadata"] == {"id": "bg"}
    assert run(["transform", str(levi), "--to", "amr", "--out", str(back)]) == EXIT_OK
    (rec,) = read_penman(back)
    assert rec.graph.canonical() == read_penman(src)[0].graph.canonical()


def test_linearize_levi(tmp_path, capsys):
    src = tmp_path / "bg.amr"
    src.write_text(BOY_GIRL + "\n")
    assert run(["linearize", str(src), "--mode", "levi"]) == EXIT_OK
    entry = json.loads(capsys.readouterr().out)
    names = [e["name"] if isinstance(e, dict) else e[1] for e in entry["entries"]]
    assert names[1:] == ["want-01", "believe-01", "ARG1", "boy", "ARG1", "ARG0", "girl", "ARG0"]


def test_stats_matches_golden_file(capsys):
    args = ["stats", str(TOY_AMR), "--features", str(TOY_FEATURES), "--check", str(TOY_STATS)]
    assert run(args) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == json.loads(TOY_STATS.read_text())


def test_stats_mismatch_is_a_data_error(tmp_path):
    golden = tmp_path / "golden.json"
    golden.write_text(json.dumps({"sentences": 1}))
    assert run(["stats", str(TOY_AMR), "--check", str(golden)]) == EXIT_DATA


def test_params_report(capsys):
    assert run(["params", "--toy"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {"nd-bd-bd", "nd-ad-bd", "nd-ad-lv"}
    assert report["nd-ad-lv"]["decoder"] < report["nd-bd-bd"]["decoder"]
    assert report["nd-ad-lv"]["biaffine_decoder"] == 0


def test_train_writes_model_directory(model_dir):
    out, _ = model_dir
    assert {p.name for p in out.iterdir()} == {"params.ckpt", "config.json", "vocab.json", "metrics.jsonl"}
    records = [json.loads(l) for l in (out / "metrics.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in records] == [1, 2]
    assert "smatch_f1" in records[-1]


def test_parse_output_reparses(model_dir, tmp_path):
    out, corpus = model_dir
    parsed = tmp_path / "pred.amr"
    assert run(["parse", str(corpus), "--model", str(out), "--out", str(parsed)]) == EXIT_OK
    records = loads_penman(parsed.read_text())
    assert len(records) == 3
    text = tmp_path / "plain.txt"
    text.write_text("the boy wants the girl\nthe cat sleeps\n")
    assert run(["parse", str(text), "--text", "--model", str(out), "--out", str(parsed)]) == EXIT_OK
    assert [r.metadata["tok"] for r in read_penman(parsed)] == ["the boy wants the girl", "the cat sleeps"]


def test_eval_report(tmp_path, capsys):
    gold = tmp_path / "gold.amr"
    gold.write_text(BOY_GIRL + "\n")
    pred = tmp_path / "pred.amr"
    pred.write_text("(w / want-01 :ARG0 (b / boy) :ARG1 (b2 / believe-01 :ARG0 (g / girl)))\n")
    assert run(["eval", str(pred), str(gold), "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["labeled"]["recall"] == pytest.approx(8 / 9)
    assert report["labeled"]["precision"] == 1.0
    assert run(["eval", str(pred), str(gold)]) == EXIT_OK
    assert "F1 0.9412" in capsys.readouterr().out


def test_attn_dump_grids(model_dir, tmp_path):
    out, corpus = model_dir
    dump = tmp_path / "attn"
    assert run(["attn-dump", str(corpus), "--model", str(out), "--index", "2", "--out", str(dump)]) == EXIT_OK
    words = read_penman(corpus)[1].metadata["tok"].split()
    cols, rows, tt = read_grid(dump / "token_token.csv")
    assert cols == ["<root>"] + words and np.allclose(tt.sum(axis=1), 1.0, atol=1e-5)
    cols, _, nt = read_grid(dump / "node_token.csv")
    assert cols == words
    cols, rows, nn = read_grid(dump / "node_node.csv")
    assert cols[0] == "<root>"
    assert np.allclose(np.triu(nn, 1), 0.0)
    assert (np.diag(nn) > 0).all()


def test_unknown_flag_is_usage_error(capsys):
    assert run(["stats", str(TOY_AMR), "--bogus"]) == EXIT_USAGE
    assert run([]) == EXIT_USAGE


def test_missing_file_is_data_error(tmp_path, capsys):
    assert run(["stats", str(tmp_path / "nope.amr")]) == EXIT_DATA
    assert capsys.readouterr().err.startswith("error[io]:")


def test_malformed_penman_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.amr"
    bad.write_text("(a / alpha :ARG0 (b / beta)\n")
    assert run(["transform", str(bad), "--roundtrip"]) == EXIT_DATA
    assert "error[format]" in capsys.readouterr().err


def test_bad_attn_index_is_usage_error(model_dir):
    out, corpus = model_dir
    assert run(["attn-dump", str(corpus), "--model", str(out), "--index", "9"]) == EXIT_USAGE


def test_divergence_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(training, "DIVERGENCE_LIMIT", 0.0)
    code = run(["train", str(small_corpus(tmp_path, 1)), "--toy", "--epochs", "1", "--out", str(tmp_path / "m")])
    assert code == EXIT_DIVERGED
    assert "error[divergence]" in capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"toy": True, "model": {"hidden_size": 32}}))
    assert run(["params", "--config", str(config), "--variant", "nd-ad-lv"]) == EXIT_OK
    assert list(json.loads(capsys.readouterr().out)) == ["nd-ad-lv"]
    config.write_text(json.dumps({"optimizer": {}}))
    assert run(["params", "--config", str(config)]) == EXIT_USAGE


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "levi_amr", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.strip() == "0.1.0"
