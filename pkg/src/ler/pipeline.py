"""End-to-end pipeline: corpus -> embeddings -> head -> extraction ->
filtering -> evaluation, plus the threshold sweep.

Every derived artifact embeds a config digest (a hash over the run
parameters and the corpus content, excluding the threshold) so evaluation
and comparison refuse inputs from incompatible runs. All stages are
deterministic: rerunning a config yields byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import classifier, filtering, patterns
from .corpus import Corpus, Document, EntitySpan, load_corpus, split_corpus, synth_corpus, write_corpus
from .embedding import EmbeddingMatrix, pseudo_embed, read_embeddings, write_embeddings
from .errors import ConfigError, EvalError, LerError
from .evaluation import (
    ComparisonTable,
    MatchCounts,
    MetricsReport,
    compare_reports,
    compute_metrics,
    match_spans,
    write_report,
)

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunConfig:
    """Everything a full run needs; paths may be None when synthesizing."""

    docs: int = 120
    noise: float = 0.4
    ratio: float = 0.8
    dim: int = 16
    seed: int = 42
    signal: float = 0.8
    epochs: int = 300
    lr: float = 0.5
    tau: float | None = None  # None: pick the sweep's best-F1 threshold
    tau_min: float = 0.0
    tau_max: float = 1.1
    steps: int = 23
    corpus: Path | None = None
    embeddings: Path | None = None
    out_dir: Path = Path("ler-out")

    def validate(self) -> None:
        if self.dim < 2:
            raise ConfigError(f"dim must be >= 2, got {self.dim}")
        if self.steps < 2:
            raise ConfigError(f"steps must be >= 2, got {self.steps}")
        if self.tau_min >= self.tau_max:
            raise ConfigError(f"tau range is empty: [{self.tau_min}, {self.tau_max}]")
        if self.tau is not None and not math.isfinite(self.tau):
            raise ConfigError(f"tau must be finite, got {self.tau}")
        for name in ("corpus", "embeddings"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} path does not exist: {path}")


def sha256_file(path: str | Path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def config_digest(corpus_sha: str, **params) -> str:
    """Digest identifying a run: corpus content plus every non-tau parameter."""
    blob = json.dumps({"corpus": corpus_sha, **params}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# --- embeddings directory ----------------------------------------------------

def write_embedding_dir(
    docs: Sequence[Document], out_dir: str | Path, matrices: Mapping[str, EmbeddingMatrix],
    meta: dict,
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for doc in docs:
        name = f"{doc.id}.emb"
        write_embeddings(matrices[doc.id], out_dir / name)
        files[doc.id] = name
    manifest = {"dim": meta["dim"], "files": files, "meta": meta}
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_embedding_dir(emb_dir: str | Path, docs: Sequence[Document]) -> dict[str, EmbeddingMatrix]:
    """Read one matrix per document from a directory of .emb files."""
    emb_dir = Path(emb_dir)
    matrices = {}
    for doc in docs:
        path = emb_dir / f"{doc.id}.emb"
        if not path.exists():
            raise ConfigError(f"missing embedding file for document {doc.id!r}: {path}")
        m = read_embeddings(path)
        if m.n_tokens != len(doc.tokens):
            raise ConfigError(
                f"document {doc.id!r}: {len(doc.tokens)} tokens but {m.n_tokens} "
                f"embedding rows in {path.name}"
            )
        matrices[doc.id] = m
    dims = {m.dim for m in matrices.values()}
    if len(dims) > 1:
        raise ConfigError(f"inconsistent embedding dims in {emb_dir}: {sorted(dims)}")
    return matrices


def embed_corpus(
    docs: Sequence[Document], dim: int, seed: int, signal: float
) -> dict[str, EmbeddingMatrix]:
    return {doc.id: pseudo_embed(doc, dim, seed, signal) for doc in docs}


# --- extraction and predictions ----------------------------------------------

def extract_baseline(
    docs: Sequence[Document],
    matrices: Mapping[str, EmbeddingMatrix],
    head: classifier.LinearHead,
) -> dict[str, list[EntitySpan]]:
    """Predicted spans per document before any filtering."""
    spans = {}
    for doc in docs:
        preds = classifier.predict_tokens(matrices[doc.id], head)
        spans[doc.id] = classifier.decode_spans(preds)
    return spans


def apply_filter(
    docs: Sequence[Document],
    baseline: Mapping[str, list[EntitySpan]],
    matrices: Mapping[str, EmbeddingMatrix],
    registry: patterns.PatternRegistry,
    tau: float,
) -> tuple[dict[str, list[EntitySpan]], dict[str, list[filtering.ScoredEntity]]]:
    hybrid, audits = {}, {}
    for doc in docs:
        kept, audit = filtering.filter_entities(baseline[doc.id], matrices[doc.id], registry, tau)
        hybrid[doc.id] = kept
        audits[doc.id] = audit
    return hybrid, audits


def evaluate(
    docs: Sequence[Document],
    predicted: Mapping[str, list[EntitySpan]],
    tau: float | None,
    digest: str,
) -> MetricsReport:
    total = MatchCounts.zero()
    for doc in docs:
        total = total + match_spans(predicted[doc.id], doc.gold_entities)
    return compute_metrics(total, tau=tau, config_digest=digest)


def _span_rec(span: EntitySpan) -> dict:
    return {"start_token": span.start_token, "end_token": span.end_token, "label": span.label}


def _audit_rec(entry: filtering.ScoredEntity) -> dict:
    return {
        "span": _span_rec(entry.span),
        "similarity": None if entry.similarity is None else round(entry.similarity, 6),
        "decision": "retain" if entry.retained else "discard",
        "reason": entry.reason,
    }


def write_predictions(
    path: str | Path,
    docs: Sequence[Document],
    baseline: Mapping[str, list[EntitySpan]],
    hybrid: Mapping[str, list[EntitySpan]] | None,
    audits: Mapping[str, list[filtering.ScoredEntity]] | None,
    meta: dict,
) -> None:
    """Line-delimited predictions: a meta header record, then one record per doc."""
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for doc in docs:
            rec = {
                "id": doc.id,
                "baseline": [_span_rec(s) for s in baseline[doc.id]],
                "hybrid": None if hybrid is None else [_span_rec(s) for s in hybrid[doc.id]],
                "audit": None if audits is None else [_audit_rec(a) for a in audits[doc.id]],
            }
            handle.write(json.dumps(rec, sort_keys=True) + "\n")


def read_predictions(path: str | Path) -> tuple[dict, dict[str, dict]]:
    """Returns (meta, records keyed by doc id)."""
    meta: dict = {}
    records: dict[str, dict] = {}
    try:
        handle = Path(path).open(encoding="utf-8")
    except OSError as exc:
        raise EvalError(f"cannot read predictions file: {exc}") from exc
    with handle:
        for line in handle:
            if not line.strip():
                continue
            rec = json.loads(line)
            if "meta" in rec and "id" not in rec:
                meta = rec["meta"]
                continue
            records[rec["id"]] = rec
    return meta, records


def spans_from_records(records: Mapping[str, dict], which: str) -> dict[str, list[EntitySpan]]:
    out = {}
    for doc_id, rec in records.items():
        raw = rec.get(which)
        if raw is None:
            raise EvalError(f"predictions for {doc_id!r} have no {which!r} spans")
        out[doc_id] = [EntitySpan(s["start_token"], s["end_token"], s["label"]) for s in raw]
    return out


# --- threshold sweep -----------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    tau: float
    precision: float
    recall: float
    f1: float
    retained: int


def sweep_tau(
    docs: Sequence[Document],
    baseline: Mapping[str, list[EntitySpan]],
    matrices: Mapping[str, EmbeddingMatrix],
    registry: patterns.PatternRegistry,
    tau_min: float,
    tau_max: float,
    steps: int,
    digest: str,
) -> list[SweepRow]:
    """Evaluate the frozen head and registry at each threshold on the test split."""
    if steps < 2:
        raise ConfigError(f"steps must be >= 2, got {steps}")
    if tau_min >= tau_max:
        raise ConfigError(f"tau range is empty: [{tau_min}, {tau_max}]")
    baseline_report = evaluate(docs, baseline, None, digest)
    rows = []
    prev_retained = None
    for tau in np.linspace(tau_min, tau_max, steps):
        tau = float(tau)
        hybrid, _ = apply_filter(docs, baseline, matrices, registry, tau)
        report = evaluate(docs, hybrid, tau, digest)
        if report.micro.recall > baseline_report.micro.recall + 1e-12:
            raise EvalError(
                f"filter at tau={tau} raised recall above baseline; "
                "subset property violated"
            )
        retained = sum(len(hybrid[d.id]) for d in docs)
        if prev_retained is not None and retained > prev_retained:
            raise EvalError(f"retained count increased at tau={tau}")
        prev_retained = retained
        rows.append(SweepRow(tau, report.micro.precision, report.micro.recall,
                             report.micro.f1, retained))
    return rows


def best_f1_tau(rows: Sequence[SweepRow]) -> float:
    """Threshold of the best-F1 row; ties break toward the smallest tau."""
    return max(rows, key=lambda r: r.f1).tau  # max keeps the first (lowest tau) on ties


def render_sweep(rows: Sequence[SweepRow]) -> str:
    lines = [f"{'tau':>8}{'P':>10}{'R':>10}{'F1':>10}{'retained':>10}"]
    for r in rows:
        lines.append(
            f"{r.tau:8.4f}{r.precision:10.4f}{r.recall:10.4f}{r.f1:10.4f}{r.retained:10d}"
        )
    return "\n".join(lines) + "\n"


def write_sweep(rows: Sequence[SweepRow], path: str | Path, meta: dict) -> None:
    doc = {
        "meta": meta,
        "rows": [
            {
                "tau": round(r.tau, 6),
                "precision": round(r.precision, 4),
                "recall": round(r.recall, 4),
                "f1": round(r.f1, 4),
                "retained": r.retained,
            }
            for r in rows
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- full run ------------------------------------------------------------------

def run_pipeline(config: RunConfig) -> ComparisonTable:
    """Execute the whole pipeline and write every artifact under out_dir.

    Stages: synth/load -> split -> embed (pseudo, or a pre-exported
    directory) -> train -> extract -> sweep/filter -> eval both -> compare.
    Deterministic per config; artifacts embed the config digest. If any
    stage fails, artifacts already written by this run are removed so no
    partial output survives.
    """
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    try:
        return _run_pipeline(config, out, created)
    except LerError:
        for path in reversed(created):
            if path.is_dir():
                shutil.rmtree(path, ignore_errors=True)
            elif path.exists():
                path.unlink()
        raise


def _run_pipeline(config: RunConfig, out: Path, created: list[Path]) -> ComparisonTable:
    def artifact(path: Path) -> Path:
        created.append(path)
        return path

    if config.corpus is not None:
        corpus_path = Path(config.corpus)
        corpus = load_corpus(corpus_path)
    else:
        corpus = synth_corpus(config.docs, config.noise, config.seed)
        corpus_path = artifact(out / "corpus.jsonl")
        write_corpus(corpus, corpus_path)
    corpus_sha = sha256_file(corpus_path)
    log.info("corpus: %d documents (%s)", len(corpus), corpus_path.name)

    split = split_corpus(corpus, config.ratio, config.seed)
    write_corpus(Corpus(split.train), artifact(out / "train.jsonl"))
    write_corpus(Corpus(split.test), artifact(out / "test.jsonl"))

    digest = config_digest(
        corpus_sha,
        ratio=config.ratio,
        dim=config.dim,
        seed=config.seed,
        signal=config.signal,
        epochs=config.epochs,
        lr=config.lr,
    )

    all_docs = list(split.train) + list(split.test)
    if config.embeddings is not None:
        matrices = load_embedding_dir(config.embeddings, all_docs)
        dim = next(iter(matrices.values())).dim if matrices else config.dim
        if dim != config.dim:
            log.info("using embedding dim %d from %s", dim, config.embeddings)
    else:
        dim = config.dim
        matrices = embed_corpus(all_docs, dim, config.seed, config.signal)
        write_embedding_dir(
            all_docs, artifact(out / "emb"), matrices,
            meta={"dim": dim, "seed": config.seed, "signal": config.signal,
                  "corpus_sha256": corpus_sha, "config_digest": digest},
        )

    head = classifier.train_head(split.train, matrices, config.epochs, config.lr, config.seed)
    classifier.save_head(head, artifact(out / "head.json"),
                         meta={"config_digest": digest, "corpus_sha256": corpus_sha})

    registry = patterns.build_patterns(split.train, matrices)
    patterns.save_registry(registry, artifact(out / "patterns.json"),
                           meta={"config_digest": digest, "corpus_sha256": corpus_sha})

    baseline = extract_baseline(split.test, matrices, head)

    rows = sweep_tau(split.test, baseline, matrices, registry,
                     config.tau_min, config.tau_max, config.steps, digest)
    write_sweep(rows, artifact(out / "sweep.json"), meta={"config_digest": digest,
                                                           "corpus_sha256": corpus_sha})
    tau = config.tau if config.tau is not None else best_f1_tau(rows)
    log.info("threshold: tau=%.4f%s", tau, "" if config.tau is None else " (given)")

    hybrid, audits = apply_filter(split.test, baseline, matrices, registry, tau)
    write_predictions(
        artifact(out / "predictions.jsonl"), split.test, baseline, hybrid, audits,
        meta={"config_digest": digest, "corpus_sha256": corpus_sha,
              "dim": dim, "tau": tau},
    )

    baseline_report = evaluate(split.test, baseline, None, digest)
    hybrid_report = evaluate(split.test, hybrid, tau, digest)
    if hybrid_report.micro.recall > baseline_report.micro.recall + 1e-12:
        raise EvalError("filtered recall exceeds baseline recall; subset property violated")
    write_report(baseline_report, artifact(out / "report_baseline.json"))
    write_report(hybrid_report, artifact(out / "report_hybrid.json"))

    table = compare_reports(baseline_report, hybrid_report)
    artifact(out / "comparison.txt").write_text(
        f"# config_digest={digest} tau={tau:.6f}\n" + table.render(), encoding="utf-8"
    )
    return table
