"""Per-class reference vectors used to validate predicted entities.

The pattern for a class is the centroid of the centroids of that class's
gold training spans, so patterns live in the same vector space as the token
embeddings they are compared against. A registry can also be loaded from a
hand-authored file in the same format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import ENTITY_LABELS, Document
from .embedding import EmbeddingMatrix
from .errors import PatternError


@dataclass(frozen=True, eq=False)
class PatternRegistry:
    """One reference vector per entity label; OUTSIDE has no pattern."""

    dim: int
    patterns: Mapping[str, np.ndarray]

    def __post_init__(self):
        if set(self.patterns) != set(ENTITY_LABELS):
            missing = sorted(set(ENTITY_LABELS) - set(self.patterns))
            extra = sorted(set(self.patterns) - set(ENTITY_LABELS))
            raise PatternError(
                f"registry must cover exactly {', '.join(ENTITY_LABELS)}"
                + (f"; missing {', '.join(missing)}" if missing else "")
                + (f"; unexpected {', '.join(extra)}" if extra else "")
            )
        fixed = {}
        for label, vec in self.patterns.items():
            v = np.asarray(vec, dtype=np.float64)
            if v.shape != (self.dim,):
                raise PatternError(
                    f"pattern for {label} has shape {v.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(v)):
                raise PatternError(f"non-finite component in pattern for {label}")
            if np.linalg.norm(v) == 0.0:
                raise PatternError(f"zero-norm pattern for {label}")
            v.flags.writeable = False
            fixed[label] = v
        object.__setattr__(self, "patterns", fixed)


def build_patterns(
    train_docs: Sequence[Document], embeddings: Mapping[str, EmbeddingMatrix]
) -> PatternRegistry:
    """Compute per-class patterns as the mean of gold-span centroids.

    Requires every label to occur in at least one gold span of the training
    subset; raises PatternError naming the first label that does not.
    """
    centroids: dict[str, list[np.ndarray]] = {label: [] for label in ENTITY_LABELS}
    dim = None
    for doc in train_docs:
        if doc.id not in embeddings:
            raise PatternError(f"no embedding matrix for document {doc.id!r}")
        m = embeddings[doc.id]
        if dim is None:
            dim = m.dim
        elif m.dim != dim:
            raise PatternError(
                f"dimension mismatch: document {doc.id!r} has dim {m.dim}, expected {dim}"
            )
        rows = m.rows.astype(np.float64)
        for span in doc.gold_entities:
            if span.end_token > m.n_tokens:
                raise PatternError(
                    f"document {doc.id!r}: span ({span.start_token},{span.end_token}) "
                    f"out of range for {m.n_tokens} embedding rows"
                )
            centroids[span.label].append(rows[span.start_token:span.end_token].mean(axis=0))
    patterns = {}
    for label in ENTITY_LABELS:
        if not centroids[label]:
            raise PatternError(f"no gold spans for label {label} in training subset")
        # np.mean uses pairwise summation, keeping the result order-invariant
        # to well below 1e-9.
        patterns[label] = np.mean(np.stack(centroids[label]), axis=0)
    return PatternRegistry(dim=dim, patterns=patterns)


def save_registry(registry: PatternRegistry, path: str | Path, meta: dict | None = None) -> None:
    """Persist the registry as structured text, floats at 17 significant digits."""
    entries = ", ".join(
        f'"{label}": [{", ".join(format(float(x), ".17g") for x in registry.patterns[label])}]'
        for label in ENTITY_LABELS
    )
    text = f'{{"dim": {registry.dim}, "patterns": {{{entries}}}'
    if meta is not None:
        text += f', "meta": {json.dumps(meta, sort_keys=True)}'
    Path(path).write_text(text + "}\n", encoding="utf-8")


def load_registry(path: str | Path, expect_dim: int | None = None) -> PatternRegistry:
    """Load a registry file, checking labels and (optionally) the dimension."""
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PatternError(f"cannot read registry file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PatternError(f"malformed registry file {path}: {exc.msg}") from None
    for key in ("dim", "patterns"):
        if key not in rec:
            raise PatternError(f"registry file {path} missing field {key!r}")
    dim = int(rec["dim"])
    if expect_dim is not None and dim != expect_dim:
        raise PatternError(f"dimension mismatch: file dim {dim} vs pipeline dim {expect_dim}")
    for label in ENTITY_LABELS:
        if label not in rec["patterns"]:
            raise PatternError(f"registry file {path} missing entry for {label}")
    return PatternRegistry(
        dim=dim,
        patterns={label: np.asarray(rec["patterns"][label]) for label in ENTITY_LABELS},
    )


def registry_meta(path: str | Path) -> dict:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise PatternError(f"cannot read registry file: {exc}") from exc
    return rec.get("meta", {})
