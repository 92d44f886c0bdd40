"""Command-line driver.

Subcommands: synth, split, embed, train, extract, eval, compare, sweep,
demo. Flags override an optional key=value config file (--config). Set
LER_LOG=debug|info|warning|error to control verbosity. On failure the exit
status is nonzero and stderr carries a single machine-parsable line:

    ler: error module=<module> message="<what went wrong>"
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import classifier, patterns, pipeline
from .corpus import Corpus, load_corpus, split_corpus, synth_corpus, write_corpus
from .errors import ConfigError, EvalError, LerError
from .evaluation import compare_reports, read_report, write_report

log = logging.getLogger(__name__)

_CONFIG_KEYS = {
    "corpus": str, "dim": int, "seed": int, "tau": float, "epochs": int,
    "lr": float, "embeddings": str, "head": str, "patterns": str, "out": str,
    "noise": float, "docs": int, "tau_min": float, "tau_max": float,
    "steps": int, "ratio": float, "signal": float,
}


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        _apply_config_file(args)
        return args.func(args)
    except LerError as exc:
        message = exc.message.replace('"', "'")
        print(f'ler: error module={exc.module} message="{message}"', file=sys.stderr)
        return 1


def _setup_logging() -> None:
    level = os.environ.get("LER_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _apply_config_file(args: argparse.Namespace) -> None:
    """Fill unset options from a key=value file; explicit flags win."""
    path = getattr(args, "config", None)
    if path is None:
        return
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config file line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"config file line {lineno}: unknown key {key!r}")
        if getattr(args, key, None) is None and hasattr(args, key):
            try:
                setattr(args, key, _CONFIG_KEYS[key](value))
            except ValueError:
                raise ConfigError(
                    f"config file line {lineno}: bad value {value!r} for {key}"
                ) from None


def _add_common(sub: argparse.ArgumentParser, *names: str) -> None:
    flags = {
        "config": lambda: sub.add_argument("--config", help="key=value config file"),
        "corpus": lambda: sub.add_argument("--corpus", help="corpus file (jsonl)"),
        "dim": lambda: sub.add_argument("--dim", type=int, help="embedding dimension"),
        "seed": lambda: sub.add_argument("--seed", type=int, help="RNG seed"),
        "tau": lambda: sub.add_argument("--tau", type=float, help="similarity threshold"),
        "epochs": lambda: sub.add_argument("--epochs", type=int, help="training epochs"),
        "lr": lambda: sub.add_argument("--lr", type=float, help="learning rate"),
        "embeddings": lambda: sub.add_argument("--embeddings", help="embeddings directory"),
        "head": lambda: sub.add_argument("--head", help="classifier head file"),
        "patterns": lambda: sub.add_argument("--patterns", help="pattern registry file"),
        "out": lambda: sub.add_argument("--out", help="output path"),
        "noise": lambda: sub.add_argument("--noise", type=float, help="distractor fraction"),
        "docs": lambda: sub.add_argument("--docs", type=int, help="synthetic document count"),
        "ratio": lambda: sub.add_argument("--ratio", type=float, help="train fraction"),
        "signal": lambda: sub.add_argument("--signal", type=float,
                                           help="pseudo-embedding signal strength"),
        "tau_min": lambda: sub.add_argument("--tau-min", dest="tau_min", type=float),
        "tau_max": lambda: sub.add_argument("--tau-max", dest="tau_max", type=float),
        "steps": lambda: sub.add_argument("--steps", type=int, help="sweep steps"),
    }
    for name in names:
        flags[name]()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ler",
        description="Hybrid legal entity recognition: classify, filter, evaluate.",
    )
    parser.set_defaults(command=None)
    subs = parser.add_subparsers(dest="command")

    p = subs.add_parser("synth", help="generate a synthetic annotated corpus")
    _add_common(p, "config", "docs", "noise", "seed", "out")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("split", help="split a corpus into train/test files")
    _add_common(p, "config", "corpus", "ratio", "seed")
    p.add_argument("--out-train", help="train corpus output path")
    p.add_argument("--out-test", help="test corpus output path")
    p.set_defaults(func=cmd_split)

    p = subs.add_parser("embed", help="write pseudo-embeddings for a corpus")
    _add_common(p, "config", "corpus", "dim", "seed", "signal", "out")
    p.set_defaults(func=cmd_embed)

    p = subs.add_parser("train", help="train the classification head")
    _add_common(p, "config", "corpus", "embeddings", "epochs", "lr", "seed", "out")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("extract", help="predict spans (and optionally filter them)")
    _add_common(p, "config", "corpus", "embeddings", "head", "patterns", "tau", "out")
    p.set_defaults(func=cmd_extract)

    p = subs.add_parser("eval", help="score a predictions file against gold spans")
    _add_common(p, "config", "corpus", "out")
    p.add_argument("--predictions", help="predictions file (jsonl)")
    p.add_argument("--which", choices=("baseline", "hybrid"), default="baseline")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("compare", help="render a baseline-vs-hybrid table")
    _add_common(p, "config", "out")
    p.add_argument("--baseline", help="baseline report file")
    p.add_argument("--hybrid", help="hybrid report file")
    p.set_defaults(func=cmd_compare)

    p = subs.add_parser("sweep", help="sweep the threshold over the test split")
    _add_common(p, "config", "corpus", "embeddings", "head", "patterns",
                "tau_min", "tau_max", "steps", "out")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("demo", help="canned end-to-end run with synthetic data")
    _add_common(p, "config", "docs", "noise", "ratio", "dim", "seed", "signal",
                "epochs", "lr", "tau", "tau_min", "tau_max", "steps",
                "corpus", "embeddings", "out")
    p.set_defaults(func=cmd_demo)

    return parser


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise ConfigError(f"missing required option --{name.replace('_', '-')}")


def _val(args: argparse.Namespace, name: str, default):
    value = getattr(args, name, None)
    return default if value is None else value


def cmd_synth(args: argparse.Namespace) -> int:
    _require(args, "out")
    corpus = synth_corpus(_val(args, "docs", 120), _val(args, "noise", 0.0),
                          _val(args, "seed", 42))
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} documents to {args.out}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    _require(args, "corpus", "out_train", "out_test")
    corpus = load_corpus(args.corpus)
    split = split_corpus(corpus, _val(args, "ratio", 0.8), _val(args, "seed", 42))
    write_corpus(Corpus(split.train), args.out_train)
    write_corpus(Corpus(split.test), args.out_test)
    print(f"wrote {len(split.train)} train / {len(split.test)} test documents")
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    _require(args, "corpus", "out")
    corpus = load_corpus(args.corpus)
    dim = _val(args, "dim", 16)
    seed = _val(args, "seed", 42)
    signal = _val(args, "signal", 0.8)
    matrices = pipeline.embed_corpus(list(corpus), dim, seed, signal)
    corpus_sha = pipeline.sha256_file(args.corpus)
    pipeline.write_embedding_dir(
        list(corpus), args.out, matrices,
        meta={"dim": dim, "seed": seed, "signal": signal, "corpus_sha256": corpus_sha},
    )
    print(f"wrote {len(corpus)} embedding files to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    _require(args, "corpus", "embeddings", "out")
    corpus = load_corpus(args.corpus)
    matrices = pipeline.load_embedding_dir(args.embeddings, list(corpus))
    epochs = _val(args, "epochs", 300)
    lr = _val(args, "lr", 0.5)
    seed = _val(args, "seed", 42)
    head = classifier.train_head(list(corpus), matrices, epochs, lr, seed)
    corpus_sha = pipeline.sha256_file(args.corpus)
    digest = pipeline.config_digest(corpus_sha, dim=head.dim, epochs=epochs, lr=lr, seed=seed)
    classifier.save_head(head, args.out,
                         meta={"config_digest": digest, "corpus_sha256": corpus_sha})
    print(f"trained head (dim={head.dim}) written to {args.out}")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    _require(args, "corpus", "embeddings", "head", "out")
    corpus = load_corpus(args.corpus)
    docs = list(corpus)
    matrices = pipeline.load_embedding_dir(args.embeddings, docs)
    head = classifier.load_head(args.head)
    baseline = pipeline.extract_baseline(docs, matrices, head)
    corpus_sha = pipeline.sha256_file(args.corpus)
    head_meta = classifier.head_meta(args.head)
    digest = pipeline.config_digest(
        corpus_sha, head=head_meta.get("config_digest", ""), dim=head.dim
    )
    hybrid = audits = None
    tau = getattr(args, "tau", None)
    if args.patterns is not None:
        if tau is None:
            raise ConfigError("--tau is required when --patterns is given")
        registry = patterns.load_registry(args.patterns, expect_dim=head.dim)
        hybrid, audits = pipeline.apply_filter(docs, baseline, matrices, registry, tau)
    pipeline.write_predictions(
        args.out, docs, baseline, hybrid, audits,
        meta={"config_digest": digest, "corpus_sha256": corpus_sha,
              "dim": head.dim, "tau": tau},
    )
    n_base = sum(len(v) for v in baseline.values())
    n_hyb = "-" if hybrid is None else sum(len(v) for v in hybrid.values())
    print(f"extracted {n_base} baseline spans (hybrid: {n_hyb}) to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    _require(args, "corpus", "predictions", "out")
    corpus = load_corpus(args.corpus)
    meta, records = pipeline.read_predictions(args.predictions)
    corpus_sha = pipeline.sha256_file(args.corpus)
    recorded = meta.get("corpus_sha256", "")
    if recorded and recorded != corpus_sha:
        raise EvalError(
            f"config digest mismatch: predictions were made on corpus "
            f"{recorded[:12]}, got {corpus_sha[:12]}"
        )
    missing = [doc.id for doc in corpus if doc.id not in records]
    if missing:
        raise EvalError(f"predictions missing for document {missing[0]!r}")
    predicted = pipeline.spans_from_records(records, args.which)
    tau = meta.get("tau") if args.which == "hybrid" else None
    report = pipeline.evaluate(list(corpus), predicted, tau,
                               meta.get("config_digest", ""))
    write_report(report, args.out)
    m = report.micro
    print(f"{args.which}: P={m.precision:.4f} R={m.recall:.4f} F1={m.f1:.4f} -> {args.out}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    _require(args, "baseline", "hybrid")
    table = compare_reports(read_report(args.baseline), read_report(args.hybrid))
    text = table.render()
    if getattr(args, "out", None):
        Path(args.out).write_text(
            f"# config_digest={table.config_digest}\n" + text, encoding="utf-8"
        )
    print(text, end="")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    _require(args, "corpus", "embeddings", "head", "patterns", "out")
    corpus = load_corpus(args.corpus)
    docs = list(corpus)
    matrices = pipeline.load_embedding_dir(args.embeddings, docs)
    head = classifier.load_head(args.head)
    registry = patterns.load_registry(args.patterns, expect_dim=head.dim)
    baseline = pipeline.extract_baseline(docs, matrices, head)
    corpus_sha = pipeline.sha256_file(args.corpus)
    digest = pipeline.config_digest(
        corpus_sha, head=classifier.head_meta(args.head).get("config_digest", ""),
        dim=head.dim,
    )
    rows = pipeline.sweep_tau(
        docs, baseline, matrices, registry,
        _val(args, "tau_min", 0.0), _val(args, "tau_max", 1.1),
        _val(args, "steps", 23), digest,
    )
    pipeline.write_sweep(rows, args.out, meta={"config_digest": digest,
                                               "corpus_sha256": corpus_sha})
    print(pipeline.render_sweep(rows), end="")
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    config = pipeline.RunConfig(
        docs=_val(args, "docs", 120),
        noise=_val(args, "noise", 0.4),
        ratio=_val(args, "ratio", 0.8),
        dim=_val(args, "dim", 16),
        seed=_val(args, "seed", 42),
        signal=_val(args, "signal", 0.8),
        epochs=_val(args, "epochs", 300),
        lr=_val(args, "lr", 0.5),
        tau=getattr(args, "tau", None),
        tau_min=_val(args, "tau_min", 0.0),
        tau_max=_val(args, "tau_max", 1.1),
        steps=_val(args, "steps", 23),
        corpus=Path(args.corpus) if getattr(args, "corpus", None) else None,
        embeddings=Path(args.embeddings) if getattr(args, "embeddings", None) else None,
        out_dir=Path(_val(args, "out", "ler-out")),
    )
    table = pipeline.run_pipeline(config)
    print(table.render(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
