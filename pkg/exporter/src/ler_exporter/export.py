"""Run a pretrained transformer encoder over a corpus and write one
embedding file per document in the pipeline's binary format.

Corpus tokens are fed to the tokenizer pre-split, so sub-word pieces carry
word ids back to the tokens they came from; multi-piece tokens are pooled
by arithmetic mean over the final-layer hidden states. Runs are
deterministic: eval mode, no dropout, one document per forward pass, and a
fixed thread count.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from ler.corpus import Document, load_corpus
from ler.embedding import EmbeddingMatrix, write_embeddings

from .align import AlignmentMap, ExportError, alignment_from_word_ids

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def load_encoder(model_id: str):
    """Load tokenizer and model; failures surface as ExportError."""
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:  # transformers raises a zoo of types here
        raise ExportError(f"cannot load encoder {model_id!r}: {exc}") from exc
    if not getattr(tokenizer, "is_fast", False):
        raise ExportError(
            f"encoder {model_id!r} has no fast tokenizer; word-level alignment "
            "needs one"
        )
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def embed_document(doc: Document, tokenizer, model) -> tuple[EmbeddingMatrix, AlignmentMap]:
    """Encode one document and pool piece vectors onto corpus tokens."""
    hidden_size = int(model.config.hidden_size)
    words = [doc.token_text(i) for i in range(len(doc.tokens))]
    if not words:
        matrix = EmbeddingMatrix(doc.id, np.zeros((0, hidden_size), dtype=np.float32))
        return matrix, AlignmentMap(())
    enc = tokenizer(words, is_split_into_words=True, return_tensors="pt",
                    truncation=False)
    seq_len = enc["input_ids"].shape[1]
    max_len = getattr(model.config, "max_position_embeddings", None)
    if max_len is not None and seq_len > max_len:
        raise ExportError(
            f"document {doc.id!r}: {seq_len} encoder pieces exceed the model "
            f"maximum of {max_len}"
        )
    try:
        alignment = alignment_from_word_ids(enc.word_ids(), len(words))
    except ExportError as exc:
        raise ExportError(f"document {doc.id!r}: {exc.message}") from None
    hidden = model(**enc).last_hidden_state[0].numpy()
    rows = np.stack([hidden[list(pieces)].mean(axis=0)
                     for pieces in alignment.pieces_per_token])
    return EmbeddingMatrix(doc.id, rows.astype(np.float32)), alignment


def export_embeddings(corpus_path: str | Path, out_dir: str | Path,
                      model_id: str, threads: int = 1) -> int:
    """Write one ``<doc_id>.emb`` per document plus a manifest.

    Returns the number of embedding files written. Documents that cannot
    be aligned abort the export with their id in the error; nothing is
    skipped silently.
    """
    import torch

    torch.set_num_threads(max(1, threads))
    corpus = load_corpus(corpus_path)
    tokenizer, model = load_encoder(model_id)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    files: dict[str, str] = {}
    for doc in corpus:
        matrix, _ = embed_document(doc, tokenizer, model)
        name = f"{doc.id}.emb"
        write_embeddings(matrix, out_dir / name)
        files[doc.id] = name
        log.debug("exported %s (%d tokens)", doc.id, matrix.n_tokens)

    manifest = {
        "dim": int(model.config.hidden_size),
        "model": str(model_id),
        "corpus_sha256": hashlib.sha256(Path(corpus_path).read_bytes()).hexdigest(),
        "files": files,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return len(files)
