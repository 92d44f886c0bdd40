"""Encoder-to-pipeline adapter: exports per-document contextual embeddings
in the recognition pipeline's binary interchange format."""

from .align import AlignmentMap, ExportError, alignment_from_word_ids
from .export import embed_document, export_embeddings, load_encoder

__version__ = "0.1.0"
