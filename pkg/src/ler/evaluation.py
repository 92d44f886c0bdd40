"""Span-level exact matching, precision/recall/F1, and comparison tables.

A prediction counts as a true positive only when some gold span has the
same (start_token, end_token, label); there is no partial credit. Zero
denominators yield a metric of 0 so degenerate runs still produce reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import ENTITY_LABELS, EntitySpan
from .errors import EvalError


@dataclass(frozen=True)
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ClassCounts") -> "ClassCounts":
        return ClassCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MatchCounts:
    """tp/fp/fn per class; micro counts are the per-class sums."""

    per_class: Mapping[str, ClassCounts]

    @property
    def micro(self) -> ClassCounts:
        total = ClassCounts()
        for label in ENTITY_LABELS:
            total = total + self.per_class[label]
        return total

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(
            {label: self.per_class[label] + other.per_class[label] for label in ENTITY_LABELS}
        )

    @classmethod
    def zero(cls) -> "MatchCounts":
        return cls({label: ClassCounts() for label in ENTITY_LABELS})


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class MetricsReport:
    """Precision/recall/F1 per class and micro-averaged, plus run identity."""

    per_class: Mapping[str, ClassMetrics]
    micro: ClassMetrics
    counts: MatchCounts
    tau: float | None = None
    config_digest: str = ""


@dataclass(frozen=True)
class ComparisonTable:
    """Baseline vs hybrid micro metrics, their deltas, and regression flags."""

    baseline: ClassMetrics
    hybrid: ClassMetrics
    deltas: ClassMetrics
    flags: tuple[str, ...]
    baseline_tau: float | None
    hybrid_tau: float | None
    config_digest: str

    def render(self) -> str:
        rows = [
            ("baseline", self.baseline, "{:10.4f}"),
            ("hybrid", self.hybrid, "{:10.4f}"),
            ("delta", self.deltas, "{:+10.4f}"),
        ]
        lines = [f"{'Model':<10}{'Precision':>10}{'Recall':>10}{'F1':>10}"]
        for name, m, fmt in rows:
            lines.append(
                f"{name:<10}" + fmt.format(m.precision) + fmt.format(m.recall) + fmt.format(m.f1)
            )
        for metric in self.flags:
            lines.append(f"note: hybrid {metric} < baseline {metric}")
        return "\n".join(lines) + "\n"


def match_spans(pred: Sequence[EntitySpan], gold: Sequence[EntitySpan]) -> MatchCounts:
    """Exact-match counts; both lists must be internally non-overlapping."""
    _check_no_overlap(pred, "predictions")
    _check_no_overlap(gold, "gold")
    per_class = {}
    for label in ENTITY_LABELS:
        p = {(s.start_token, s.end_token) for s in pred if s.label == label}
        g = {(s.start_token, s.end_token) for s in gold if s.label == label}
        tp = len(p & g)
        per_class[label] = ClassCounts(tp=tp, fp=len(p) - tp, fn=len(g) - tp)
    return MatchCounts(per_class)


def _check_no_overlap(spans: Sequence[EntitySpan], which: str) -> None:
    ordered = sorted(spans, key=lambda s: (s.start_token, s.end_token))
    for a, b in zip(ordered, ordered[1:]):
        if b.start_token < a.end_token:
            raise EvalError(
                f"overlapping spans in {which}: ({a.start_token},{a.end_token}) "
                f"and ({b.start_token},{b.end_token})"
            )


def precision_recall_f1(counts: ClassCounts) -> ClassMetrics:
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return ClassMetrics(p, r, f1_score(p, r))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(
    counts: MatchCounts, tau: float | None = None, config_digest: str = ""
) -> MetricsReport:
    per_class = {label: precision_recall_f1(counts.per_class[label]) for label in ENTITY_LABELS}
    return MetricsReport(
        per_class=per_class,
        micro=precision_recall_f1(counts.micro),
        counts=counts,
        tau=tau,
        config_digest=config_digest,
    )


def compare_reports(baseline: MetricsReport, hybrid: MetricsReport) -> ComparisonTable:
    """Two-row comparison of micro metrics; refuses mismatched run digests."""
    if baseline.config_digest != hybrid.config_digest:
        raise EvalError(
            f"config digest mismatch: {baseline.config_digest!r} vs {hybrid.config_digest!r}"
        )
    deltas = ClassMetrics(
        hybrid.micro.precision - baseline.micro.precision,
        hybrid.micro.recall - baseline.micro.recall,
        hybrid.micro.f1 - baseline.micro.f1,
    )
    flags = tuple(
        metric
        for metric in ("precision", "recall", "f1")
        if getattr(hybrid.micro, metric) < getattr(baseline.micro, metric)
    )
    return ComparisonTable(
        baseline=baseline.micro,
        hybrid=hybrid.micro,
        deltas=deltas,
        flags=flags,
        baseline_tau=baseline.tau,
        hybrid_tau=hybrid.tau,
        config_digest=baseline.config_digest,
    )


def write_report(report: MetricsReport, path: str | Path) -> None:
    """Write a report file: per-class and micro blocks, metrics at 4 decimals."""
    Path(path).write_text(_report_json(report), encoding="utf-8")


def _report_json(report: MetricsReport) -> str:
    def block(label_metrics: ClassMetrics, counts: ClassCounts) -> dict:
        return {
            "precision": round(label_metrics.precision, 4),
            "recall": round(label_metrics.recall, 4),
            "f1": round(label_metrics.f1, 4),
            "tp": counts.tp,
            "fp": counts.fp,
            "fn": counts.fn,
        }

    doc = {
        "tau": report.tau,
        "config_digest": report.config_digest,
        "micro": block(report.micro, report.counts.micro),
        "per_class": {
            label: block(report.per_class[label], report.counts.per_class[label])
            for label in ENTITY_LABELS
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def read_report(path: str | Path) -> MetricsReport:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise EvalError(f"cannot read report file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EvalError(f"malformed report file {path}: {exc.msg}") from None
    try:
        counts = MatchCounts(
            {
                label: ClassCounts(
                    rec["per_class"][label]["tp"],
                    rec["per_class"][label]["fp"],
                    rec["per_class"][label]["fn"],
                )
                for label in ENTITY_LABELS
            }
        )
        per_class = {
            label: ClassMetrics(
                rec["per_class"][label]["precision"],
                rec["per_class"][label]["recall"],
                rec["per_class"][label]["f1"],
            )
            for label in ENTITY_LABELS
        }
        micro = ClassMetrics(
            rec["micro"]["precision"], rec["micro"]["recall"], rec["micro"]["f1"]
        )
    except KeyError as exc:
        raise EvalError(f"report file {path} missing field {exc}") from None
    return MetricsReport(
        per_class=per_class,
        micro=micro,
        counts=counts,
        tau=rec.get("tau"),
        config_digest=rec.get("config_digest", ""),
    )
