"""Linear + softmax token classification head.

Five classes: the four entity labels plus OUTSIDE for non-entity tokens.
Training is full-batch gradient descent on mean token cross-entropy from a
zero initialization (the problem is convex, so this is deterministic).
Span decoding follows the IO scheme: maximal runs of one non-OUTSIDE label
form one entity, so adjacent same-label entities merge.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import ENTITY_LABELS, Document, EntitySpan
from .embedding import EmbeddingMatrix
from .errors import ClassifierError

OUTSIDE = "OUTSIDE"
LABEL_ORDER: tuple[str, ...] = ENTITY_LABELS + (OUTSIDE,)
N_CLASSES = len(LABEL_ORDER)


@dataclass(frozen=True, eq=False)
class LinearHead:
    """Weights (C x d) and bias (C,) of the classification layer."""

    weights: np.ndarray
    bias: np.ndarray
    label_order: tuple[str, ...] = LABEL_ORDER

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != N_CLASSES:
            raise ClassifierError(f"weights must have shape ({N_CLASSES}, d), got {w.shape}")
        if b.shape != (N_CLASSES,):
            raise ClassifierError(f"bias must have shape ({N_CLASSES},), got {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ClassifierError("non-finite component in head parameters")
        if tuple(self.label_order) != LABEL_ORDER:
            raise ClassifierError(f"unexpected label order {self.label_order!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, dim: int) -> "LinearHead":
        return cls(np.zeros((N_CLASSES, dim)), np.zeros(N_CLASSES))


@dataclass(frozen=True, eq=False)
class TokenPrediction:
    """Per-token class probabilities and the argmax label."""

    token_index: int
    probabilities: np.ndarray
    label: str


# Extreme logit gaps (the contract allows magnitudes up to 1e4) underflow
# exp() to 0.0; clamp into the open interval so probabilities stay strictly
# positive and log-loss stays finite. The clamp is far below every stated
# tolerance.
_P_FLOOR = np.finfo(np.float64).tiny
_P_CEIL = float(np.nextafter(1.0, 0.0))


def softmax(logits: Sequence[float] | np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a length-C vector, clamped into (0,1)."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ClassifierError(f"non-finite logit in {z!r}")
    e = np.exp(z - z.max())
    return np.clip(e / e.sum(), _P_FLOOR, _P_CEIL)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return np.clip(e / e.sum(axis=1, keepdims=True), _P_FLOOR, _P_CEIL)


def predict_tokens(matrix: EmbeddingMatrix, head: LinearHead) -> list[TokenPrediction]:
    """Classify every token; ties break toward the lowest label index."""
    if matrix.dim != head.dim:
        raise ClassifierError(
            f"dimension mismatch: embeddings dim {matrix.dim} vs head dim {head.dim}"
        )
    h = matrix.rows.astype(np.float64)
    probs = _softmax_rows(h @ head.weights.T + head.bias)
    labels = probs.argmax(axis=1)  # first maximum wins
    return [
        TokenPrediction(i, probs[i], head.label_order[labels[i]])
        for i in range(matrix.n_tokens)
    ]


def token_labels(doc: Document) -> list[str]:
    """Gold IO label per token: span label inside spans, OUTSIDE elsewhere."""
    labels = [OUTSIDE] * len(doc.tokens)
    for span in doc.gold_entities:
        for i in range(span.start_token, span.end_token):
            labels[i] = span.label
    return labels


def decode_spans(predictions: Sequence[TokenPrediction]) -> list[EntitySpan]:
    """IO decoding: maximal runs of one non-OUTSIDE label become spans."""
    spans: list[EntitySpan] = []
    start = None
    current = OUTSIDE
    for i, pred in enumerate(predictions):
        if pred.label != current:
            if current != OUTSIDE:
                spans.append(EntitySpan(start, i, current))
            start, current = i, pred.label
    if current != OUTSIDE:
        spans.append(EntitySpan(start, len(predictions), current))
    return spans


def cross_entropy(head: LinearHead, h: np.ndarray, labels: np.ndarray) -> float:
    """Mean token-level cross-entropy of gold class indices under the head."""
    h = np.asarray(h, dtype=np.float64)
    labels = np.asarray(labels)
    probs = _softmax_rows(h @ head.weights.T + head.bias)
    return float(-np.mean(np.log(probs[np.arange(len(labels)), labels])))


def cross_entropy_grads(
    head: LinearHead, h: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradients of ``cross_entropy`` wrt weights and bias."""
    h = np.asarray(h, dtype=np.float64)
    labels = np.asarray(labels)
    n = len(labels)
    g = _softmax_rows(h @ head.weights.T + head.bias)
    g[np.arange(n), labels] -= 1.0
    g /= n
    return g.T @ h, g.sum(axis=0)


def train_head(
    train_docs: Sequence[Document],
    embeddings: Mapping[str, EmbeddingMatrix],
    epochs: int,
    lr: float,
    seed: int = 0,
) -> LinearHead:
    """Fit the head by full-batch gradient descent on token cross-entropy.

    Gold token labels follow the IO rule. Initialization is W = 0, b = 0;
    ``epochs = 0`` returns it unchanged. The ``seed`` is accepted for config
    plumbing but unused: zero init makes the run deterministic by itself.
    """
    del seed
    if lr <= 0:
        raise ClassifierError(f"learning rate must be positive, got {lr}")
    if epochs < 0:
        raise ClassifierError(f"epochs must be >= 0, got {epochs}")
    h, y = _training_batch(train_docs, embeddings)
    dim = h.shape[1]
    w = np.zeros((N_CLASSES, dim))
    b = np.zeros(N_CLASSES)
    for _ in range(epochs):
        gw, gb = cross_entropy_grads(LinearHead(w, b), h, y)
        w = w - lr * gw
        b = b - lr * gb
    return LinearHead(w, b)


def _training_batch(
    train_docs: Sequence[Document], embeddings: Mapping[str, EmbeddingMatrix]
) -> tuple[np.ndarray, np.ndarray]:
    """Stack all token embeddings and gold class indices in document order."""
    hs, ys = [], []
    dim = None
    for doc in train_docs:
        if doc.id not in embeddings:
            raise ClassifierError(f"no embedding matrix for document {doc.id!r}")
        m = embeddings[doc.id]
        if m.n_tokens != len(doc.tokens):
            raise ClassifierError(
                f"document {doc.id!r}: {len(doc.tokens)} tokens but "
                f"{m.n_tokens} embedding rows"
            )
        if dim is None:
            dim = m.dim
        elif m.dim != dim:
            raise ClassifierError(
                f"dimension mismatch: document {doc.id!r} has dim {m.dim}, expected {dim}"
            )
        hs.append(m.rows.astype(np.float64))
        ys.extend(LABEL_ORDER.index(lab) for lab in token_labels(doc))
    if not ys:
        raise ClassifierError("no training tokens")
    return np.concatenate(hs, axis=0), np.asarray(ys, dtype=np.int64)


def save_head(head: LinearHead, path: str | Path, meta: dict | None = None) -> None:
    """Persist the head as a text record, floats at 17 significant digits."""
    fields = [
        f'"dim": {head.dim}',
        f'"label_order": {json.dumps(list(head.label_order))}',
        f'"weights": [{", ".join(_g17(x) for x in head.weights.ravel())}]',
        f'"bias": [{", ".join(_g17(x) for x in head.bias)}]',
    ]
    if meta is not None:
        fields.append(f'"meta": {json.dumps(meta, sort_keys=True)}')
    Path(path).write_text("{" + ", ".join(fields) + "}\n", encoding="utf-8")


def load_head(path: str | Path) -> LinearHead:
    """Inverse of save_head; round-trips parameters exactly."""
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ClassifierError(f"cannot read head file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ClassifierError(f"malformed head file {path}: {exc.msg}") from None
    for key in ("dim", "label_order", "weights", "bias"):
        if key not in rec:
            raise ClassifierError(f"head file {path} missing field {key!r}")
    dim = int(rec["dim"])
    w = np.asarray(rec["weights"], dtype=np.float64)
    if w.size != N_CLASSES * dim:
        raise ClassifierError(
            f"head file {path}: expected {N_CLASSES * dim} weights, got {w.size}"
        )
    return LinearHead(w.reshape(N_CLASSES, dim), np.asarray(rec["bias"]),
                      tuple(rec["label_order"]))


def head_meta(path: str | Path) -> dict:
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ClassifierError(f"cannot read head file: {exc}") from exc
    return rec.get("meta", {})


def _g17(x: float) -> str:
    return format(float(x), ".17g")
