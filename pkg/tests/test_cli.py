import json
from pathlib import Path

import pytest

from ler.cli import main
from ler.corpus import load_corpus
from ler.evaluation import read_report
from ler import pipeline


def run(*argv):
    return main([str(a) for a in argv])


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_synth_writes_corpus(tmp_path):
    out = tmp_path / "c.jsonl"
    assert run("synth", "--docs", 10, "--noise", 0.2, "--seed", 1, "--out", out) == 0
    assert len(load_corpus(out)) == 10


def test_split_command(tmp_path):
    corpus = tmp_path / "c.jsonl"
    run("synth", "--docs", 10, "--seed", 1, "--out", corpus)
    assert run("split", "--corpus", corpus, "--ratio", 0.8, "--seed", 3,
               "--out-train", tmp_path / "train.jsonl",
               "--out-test", tmp_path / "test.jsonl") == 0
    assert len(load_corpus(tmp_path / "train.jsonl")) == 8
    assert len(load_corpus(tmp_path / "test.jsonl")) == 2


def test_stagewise_pipeline_matches_demo_reports(tmp_path):
    # Drive every subcommand by hand and check the final comparison renders.
    corpus = tmp_path / "c.jsonl"
    run("synth", "--docs", 30, "--noise", 0.4, "--seed", 5, "--out", corpus)
    run("split", "--corpus", corpus, "--seed", 5,
        "--out-train", tmp_path / "train.jsonl", "--out-test", tmp_path / "test.jsonl")
    for part in ("train", "test"):
        assert run("embed", "--corpus", tmp_path / f"{part}.jsonl", "--dim", 16,
                   "--seed", 5, "--signal", 0.8, "--out", tmp_path / f"emb_{part}") == 0
    assert run("train", "--corpus", tmp_path / "train.jsonl",
               "--embeddings", tmp_path / "emb_train", "--epochs", 150,
               "--lr", 0.5, "--out", tmp_path / "head.json") == 0

    # patterns are built inside demo; here reuse the library to write them
    from ler.patterns import build_patterns, save_registry
    train_docs = list(load_corpus(tmp_path / "train.jsonl"))
    matrices = pipeline.load_embedding_dir(tmp_path / "emb_train", train_docs)
    save_registry(build_patterns(train_docs, matrices), tmp_path / "patterns.json")

    assert run("extract", "--corpus", tmp_path / "test.jsonl",
               "--embeddings", tmp_path / "emb_test", "--head", tmp_path / "head.json",
               "--patterns", tmp_path / "patterns.json", "--tau", 0.6,
               "--out", tmp_path / "pred.jsonl") == 0
    for which in ("baseline", "hybrid"):
        assert run("eval", "--corpus", tmp_path / "test.jsonl",
                   "--predictions", tmp_path / "pred.jsonl", "--which", which,
                   "--out", tmp_path / f"report_{which}.json") == 0
    assert run("compare", "--baseline", tmp_path / "report_baseline.json",
               "--hybrid", tmp_path / "report_hybrid.json",
               "--out", tmp_path / "cmp.txt") == 0
    text = (tmp_path / "cmp.txt").read_text()
    assert "baseline" in text and "hybrid" in text and "delta" in text

    base = read_report(tmp_path / "report_baseline.json")
    hyb = read_report(tmp_path / "report_hybrid.json")
    assert hyb.micro.recall <= base.micro.recall + 1e-12


def test_eval_refuses_other_corpus(tmp_path):
    corpus = tmp_path / "c.jsonl"
    other = tmp_path / "o.jsonl"
    run("synth", "--docs", 6, "--seed", 1, "--out", corpus)
    run("synth", "--docs", 6, "--seed", 2, "--out", other)
    run("embed", "--corpus", corpus, "--dim", 8, "--seed", 1, "--out", tmp_path / "emb")
    run("train", "--corpus", corpus, "--embeddings", tmp_path / "emb",
        "--epochs", 5, "--lr", 0.5, "--out", tmp_path / "head.json")
    run("extract", "--corpus", corpus, "--embeddings", tmp_path / "emb",
        "--head", tmp_path / "head.json", "--out", tmp_path / "pred.jsonl")
    assert run("eval", "--corpus", other, "--predictions", tmp_path / "pred.jsonl",
               "--out", tmp_path / "r.json") == 1


def test_error_line_is_machine_parsable(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    code = run("embed", "--corpus", missing, "--out", tmp_path / "emb")
    err = capsys.readouterr().err.strip()
    assert code == 1
    assert err.startswith("ler: error module=")
    assert 'message="' in err
    assert "\n" not in err


def test_demo_tau_below_range_reproduces_baseline(tmp_path):
    out = tmp_path / "run"
    assert run("demo", "--docs", 24, "--noise", 0.3, "--seed", 3,
               "--epochs", 80, "--tau", -2, "--out", out) == 0
    base = read_report(out / "report_baseline.json")
    hyb = read_report(out / "report_hybrid.json")
    assert hyb.micro == base.micro
    assert hyb.counts == base.counts


def test_demo_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("demo", "--docs", 30, "--noise", 0.3, "--seed", 7,
                   "--epochs", 60, "--steps", 8, "--out", out) == 0
    assert _tree_bytes(a) == _tree_bytes(b)


def test_sweep_endpoints(tmp_path):
    out = tmp_path / "run"
    run("demo", "--docs", 24, "--noise", 0.3, "--seed", 11, "--epochs", 80, "--out", out)
    sweep_out = tmp_path / "sweep.json"
    assert run("sweep", "--corpus", out / "test.jsonl", "--embeddings", out / "emb",
               "--head", out / "head.json", "--patterns", out / "patterns.json",
               "--tau-min", -1.1, "--tau-max", 1.1, "--steps", 2,
               "--out", sweep_out) == 0
    rows = json.loads(sweep_out.read_text())["rows"]
    assert len(rows) == 2
    baseline = read_report(out / "report_baseline.json")
    assert rows[0]["tau"] == -1.1
    assert rows[0]["precision"] == pytest.approx(baseline.micro.precision, abs=5e-5)
    assert rows[0]["recall"] == pytest.approx(baseline.micro.recall, abs=5e-5)
    assert rows[1]["retained"] == 0


def test_sweep_retained_and_recall_non_increasing(tmp_path):
    out = tmp_path / "run"
    run("demo", "--docs", 30, "--noise", 0.4, "--seed", 13, "--epochs", 80, "--out", out)
    sweep_out = tmp_path / "sweep.json"
    run("sweep", "--corpus", out / "test.jsonl", "--embeddings", out / "emb",
        "--head", out / "head.json", "--patterns", out / "patterns.json",
        "--tau-min", -1.1, "--tau-max", 1.1, "--steps", 23, "--out", sweep_out)
    rows = json.loads(sweep_out.read_text())["rows"]
    assert len(rows) == 23
    for a, b in zip(rows, rows[1:]):
        assert b["retained"] <= a["retained"]
        assert b["recall"] <= a["recall"] + 1e-9


def test_failed_run_removes_partial_artifacts(tmp_path):
    # Point demo at an embeddings dir that is missing every file: the run
    # fails after the corpus/split artifacts were written, and they must
    # not survive.
    corpus = tmp_path / "c.jsonl"
    run("synth", "--docs", 8, "--seed", 2, "--out", corpus)
    empty = tmp_path / "no-embeddings"
    empty.mkdir()
    out = tmp_path / "run"
    assert run("demo", "--corpus", corpus, "--embeddings", empty, "--out", out) == 1
    leftovers = [p for p in out.rglob("*") if p.is_file()]
    assert leftovers == []


def test_demo_rejects_missing_corpus_path(tmp_path, capsys):
    assert run("demo", "--corpus", tmp_path / "absent.jsonl",
               "--out", tmp_path / "run") == 1
    assert "does not exist" in capsys.readouterr().err


def test_config_file_provides_defaults_flags_win(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("docs=9\nnoise=0.0\nseed=4\n# comment\n")
    out = tmp_path / "c.jsonl"
    assert run("synth", "--config", cfg, "--docs", 5, "--out", out) == 0
    assert len(load_corpus(out)) == 5  # flag overrides config
    out2 = tmp_path / "c2.jsonl"
    assert run("synth", "--config", cfg, "--out", out2) == 0
    assert len(load_corpus(out2)) == 9  # config fills the gap


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus=1\n")
    assert run("synth", "--config", cfg, "--out", tmp_path / "c.jsonl") == 1
    assert "unknown key" in capsys.readouterr().err
