"""Semantic filtering of predicted entities by cosine similarity.

Each predicted span is scored against the pattern of its own predicted
class; spans with similarity below the threshold are discarded (retained at
equality). Every decision is logged in an audit record so alternative rules
can be replayed offline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import EntitySpan
from .embedding import EmbeddingMatrix
from .errors import FilterError
from .patterns import PatternRegistry

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScoredEntity:
    """Audit record: one predicted span with its score and decision."""

    span: EntitySpan
    entity_vector: np.ndarray | None
    similarity: float | None
    retained: bool
    reason: str = "ok"


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors; rejects zero-norm inputs by name."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0:
        raise FilterError("zero-norm vector: first argument")
    if nb == 0.0:
        raise FilterError("zero-norm vector: second argument")
    return float((a @ b) / (na * nb))


def entity_embedding(span: EntitySpan, matrix: EmbeddingMatrix) -> np.ndarray:
    """Arithmetic mean of the token rows covered by the span."""
    if span.end_token > matrix.n_tokens:
        raise FilterError(
            f"span ({span.start_token},{span.end_token}) out of range for "
            f"{matrix.n_tokens} embedding rows"
        )
    return matrix.rows[span.start_token:span.end_token].astype(np.float64).mean(axis=0)


def filter_entities(
    spans: Sequence[EntitySpan],
    matrix: EmbeddingMatrix,
    registry: PatternRegistry,
    tau: float,
) -> tuple[list[EntitySpan], list[ScoredEntity]]:
    """Apply the threshold rule to every span.

    Returns the retained spans in input order plus one audit record per
    input span. A span whose entity vector has zero norm cannot be scored;
    it is discarded with an explanatory audit reason rather than failing
    the whole document.
    """
    if registry.dim != matrix.dim:
        raise FilterError(
            f"dimension mismatch: registry dim {registry.dim} vs embeddings dim {matrix.dim}"
        )
    if not math.isfinite(tau):
        raise FilterError(f"threshold must be finite, got {tau}")
    retained: list[EntitySpan] = []
    audit: list[ScoredEntity] = []
    for span in spans:
        vec = entity_embedding(span, matrix)
        if np.linalg.norm(vec) == 0.0:
            log.warning(
                "document %s: zero-norm entity vector for span (%d,%d,%s); discarded",
                matrix.doc_id, span.start_token, span.end_token, span.label,
            )
            audit.append(ScoredEntity(span, None, None, False, "zero-norm entity vector"))
            continue
        score = cosine(vec, registry.patterns[span.label])
        keep = score >= tau
        if keep:
            retained.append(span)
        audit.append(ScoredEntity(span, vec, score, keep))
    return retained, audit
