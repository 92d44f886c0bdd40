"""Per-document embedding matrices: binary interchange format and a
deterministic pseudo-embedding generator.

File layout (little-endian): magic ``LERE`` | u32 version=1 | u32 n_tokens |
u32 dim | n_tokens*dim float32 values, row-major. One file per document,
named ``<doc_id>.emb``. The generator lets the whole pipeline run without
any external encoder; real encoder output is dropped in through the same
format.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .corpus import ENTITY_LABELS, Document
from .errors import EmbeddingError

MAGIC = b"LERE"
VERSION = 1
_HEADER = struct.Struct("<4sIII")

# Relative weight of the off-anchor component of a distractor embedding.
# Large enough that cosine against the class anchor stays low (~signal/2)
# while the anchor-aligned part still dominates the linear head's logits.
_DISTRACTOR_NOISE = 2.0


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """n_tokens x dim float32 matrix of contextual token embeddings."""

    doc_id: str
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float32)
        if rows.ndim != 2:
            raise EmbeddingError(f"embedding rows must be 2-D, got shape {rows.shape}")
        if rows.shape[1] < 1:
            raise EmbeddingError("embedding dim must be positive")
        if not np.all(np.isfinite(rows)):
            raise EmbeddingError(f"non-finite component in embeddings for {self.doc_id!r}")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def n_tokens(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write one matrix in the binary layout; rewrites are byte-identical."""
    header = _HEADER.pack(MAGIC, VERSION, matrix.n_tokens, matrix.dim)
    payload = np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise EmbeddingError(f"cannot write {path}: {exc}") from exc


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read a matrix back; bit-exact inverse of write_embeddings.

    The document id is taken from the file stem. Raises EmbeddingError on a
    bad magic, unsupported version, truncated payload (expected vs actual
    byte counts reported) or non-finite components.
    """
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise EmbeddingError(f"cannot read {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise EmbeddingError(
            f"{path.name}: truncated header, expected {_HEADER.size} bytes, got {len(blob)}"
        )
    magic, version, n_tokens, dim = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise EmbeddingError(f"{path.name}: bad magic {magic!r}")
    if version != VERSION:
        raise EmbeddingError(f"{path.name}: unsupported version {version}")
    expected = _HEADER.size + n_tokens * dim * 4
    if len(blob) != expected:
        raise EmbeddingError(
            f"{path.name}: truncated payload, expected {expected} bytes, got {len(blob)}"
        )
    rows = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(n_tokens, dim)
    if np.isnan(rows).any():
        raise EmbeddingError(f"{path.name}: NaN component in payload")
    return EmbeddingMatrix(doc_id=path.stem, rows=rows)


@lru_cache(maxsize=None)
def class_anchors(dim: int) -> np.ndarray:
    """Fixed unit anchor directions, one row per entity label.

    Exactly orthogonal for dim >= 4 (QR of a fixed random matrix with sign
    normalization); plain normalized draws below that.
    """
    if dim < 2:
        raise EmbeddingError(f"embedding dim must be >= 2, got {dim}")
    rng = np.random.default_rng(_hash_seed("class-anchors", dim))
    g = rng.standard_normal((dim, len(ENTITY_LABELS)))
    if dim >= len(ENTITY_LABELS):
        q, r = np.linalg.qr(g)
        anchors = (q * np.sign(np.diag(r))).T
    else:
        anchors = (g / np.linalg.norm(g, axis=0)).T
    anchors = np.ascontiguousarray(anchors)
    anchors.flags.writeable = False
    return anchors


def _hash_seed(*parts) -> int:
    key = "|".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def pseudo_embed(doc: Document, dim: int, seed: int, signal: float) -> EmbeddingMatrix:
    """Deterministic stand-in for an encoder, keyed by (doc id, token, seed).

    Tokens inside gold spans of class c get ``signal``-weighted pull toward
    the class anchor plus (1-signal)-weighted unit hash noise. Distractor
    tokens get the same anchor pull but a large noise component orthogonal
    to the anchor, so the classifier still picks class c while the cosine
    against the class pattern collapses. All other tokens are pure noise.
    """
    if dim < 2:
        raise EmbeddingError(f"pseudo_embed requires dim >= 2, got {dim}")
    if not 0.0 <= signal <= 1.0:
        raise EmbeddingError(f"signal must be in [0,1], got {signal}")
    anchors = class_anchors(dim)
    kind = _token_kinds(doc)
    rows = np.empty((len(doc.tokens), dim), dtype=np.float64)
    for i in range(len(doc.tokens)):
        rng = np.random.default_rng(_hash_seed(seed, doc.id, i))
        u = rng.standard_normal(dim)
        norm = np.linalg.norm(u)
        u = u / norm if norm > 0 else np.eye(dim)[0]
        label_idx = kind[i]
        if label_idx == -1:
            rows[i] = u
            continue
        anchor = anchors[label_idx % len(ENTITY_LABELS)]
        if label_idx < len(ENTITY_LABELS):  # gold span token
            row = signal * anchor + (1.0 - signal) * u
            if np.linalg.norm(row) < 1e-9:
                row = signal * anchor - (1.0 - signal) * u
        else:  # distractor token
            w = u - (u @ anchor) * anchor
            wn = np.linalg.norm(w)
            if wn < 1e-9:
                w = _any_orthogonal(anchor)
            else:
                w = w / wn
            row = signal * anchor + _DISTRACTOR_NOISE * w
        rows[i] = row
    return EmbeddingMatrix(doc_id=doc.id, rows=rows.astype(np.float32))


def _token_kinds(doc: Document) -> np.ndarray:
    """Per token: gold label index, label index + 4 for distractors, else -1."""
    kind = np.full(len(doc.tokens), -1, dtype=np.int64)
    for span in doc.gold_entities:
        kind[span.start_token:span.end_token] = ENTITY_LABELS.index(span.label)
    for span in doc.distractors:
        kind[span.start_token:span.end_token] = ENTITY_LABELS.index(span.label) + len(ENTITY_LABELS)
    return kind


def _any_orthogonal(anchor: np.ndarray) -> np.ndarray:
    basis = np.zeros_like(anchor)
    basis[int(np.argmin(np.abs(anchor)))] = 1.0
    w = basis - (basis @ anchor) * anchor
    return w / np.linalg.norm(w)
