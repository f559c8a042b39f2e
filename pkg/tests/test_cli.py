import json
import subprocess
import sys

import pytest

from nqg.cli import run
from nqg.data import load_tsv, store_tsv
from nqg.generators import toy_generator


@pytest.fixture
def corpus(tmp_path):
    path = tmp_path / "data.tsv"
    store_tsv(toy_generator().generate(80, seed=0, max_depth=4), path)
    return path


def test_help(capsys):
    assert run(["--help"]) == 0
    assert "induce" in capsys.readouterr().out
    assert run(["induce", "--help"]) == 0


def test_no_command():
    assert run([]) == 2


def test_unknown_flag():
    assert run(["stats", "--bogus"]) == 2


def test_pipeline(tmp_path, corpus, capsys):
    d = tmp_path
    assert run(["split", "--in", str(corpus), "--kind", "random", "--train-size", "60",
                "--test-size", "20", "--out-train", str(d / "train.tsv"),
                "--out-test", str(d / "test.tsv"), "--report", str(d / "split.json")]) == 0
    split = json.loads((d / "split.json").read_text())
    assert split["sizes"] == {"train": 60, "test": 20}
    assert run(["induce", "--train", str(d / "train.tsv"), "--out", str(d / "g.txt"),
                "--trace", str(d / "trace.jsonl")]) == 0
    assert (d / "g.txt").read_text().strip()
    assert run(["train", "--grammar", str(d / "g.txt"), "--train", str(d / "train.tsv"),
                "--target-cfg", "funql", "--steps", "20", "--lr", "0.01", "--optimizer", "adam",
                "--d", "8", "--d-enc", "4", "--out", str(d / "p.json")]) == 0
    assert run(["eval", "--grammar", str(d / "g.txt"), "--params", str(d / "p.json"),
                "--target-cfg", "funql", "--test", str(d / "test.tsv"), "--fallback-echo",
                "--train", str(d / "train.tsv"), "--report", str(d / "r.json"),
                "--per-example", str(d / "r.jsonl")]) == 0
    report = json.loads((d / "r.json").read_text())
    assert report["exact_match"] == 1.0 and report["coverage"] == 1.0
    assert len((d / "r.jsonl").read_text().splitlines()) == 20
    assert run(["predict", "--grammar", str(d / "g.txt"), "--params", str(d / "p.json"),
                "--test", str(d / "test.tsv"), "--out", str(d / "pred.tsv")]) == 0
    lines = (d / "pred.tsv").read_text().splitlines()
    gold = load_tsv(d / "test.tsv")
    assert [l.split("\t")[1].split() for l in lines] == [list(e.target) for e in gold]
    capsys.readouterr()
    assert run(["stats", "--grammar", str(d / "g.txt"), "--train", str(d / "train.tsv")]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["examples"] == 60


def test_predict_abstain(tmp_path, capsys):
    (tmp_path / "g.txt").write_text("a ### A\n")
    (tmp_path / "t.tsv").write_text("a\tA\nb\tB\n")
    assert run(["train", "--grammar", str(tmp_path / "g.txt"), "--train", str(tmp_path / "t.tsv"),
                "--d", "4", "--d-enc", "2", "--out", str(tmp_path / "p.json")]) == 0
    assert run(["predict", "--grammar", str(tmp_path / "g.txt"), "--params",
                str(tmp_path / "p.json"), "--test", str(tmp_path / "t.tsv")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out == ["a\tA", "b\t<abstain>"]


def test_config_file(tmp_path, corpus):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"in": str(corpus), "kind": "length", "out_train": str(tmp_path / "a"),
                               "out-test": str(tmp_path / "b"), "report": str(tmp_path / "r.json")}))
    assert run(["split", "--config", str(cfg)]) == 0
    # Explicit flags override the file.
    assert run(["split", "--config", str(cfg), "--kind", "random", "--seed", "4"]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["kind"] == "random"


def test_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"no_such_flag": 1}))
    assert run(["split", "--config", str(cfg)]) == 2
    cfg.write_text("{not json")
    assert run(["split", "--config", str(cfg)]) == 2


def test_malformed_tsv(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tA\nno tab here\n")
    assert run(["verify", "--in", str(bad)]) == 2
    assert "bad.tsv:2:" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert run(["induce", "--train", str(tmp_path / "none.tsv"), "--out", str(tmp_path / "g")]) == 2


def test_computation_error(tmp_path):
    # No training example is derivable under this grammar.
    (tmp_path / "g.txt").write_text("a ### A\n")
    (tmp_path / "t.tsv").write_text("b\tB\n")
    assert run(["train", "--grammar", str(tmp_path / "g.txt"), "--train", str(tmp_path / "t.tsv"),
                "--out", str(tmp_path / "p.json")]) == 1


def test_verify(tmp_path, corpus, capsys):
    assert run(["verify", "--in", str(corpus), "--funql"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["examples"] == 80 and len(doc["hash"]) == 16
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tanswer ( x\n")
    assert run(["verify", "--in", str(bad), "--funql"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nqg", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "split" in proc.stdout
