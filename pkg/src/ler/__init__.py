"""Hybrid legal entity recognition.

Pipeline: token classification over contextual embeddings (linear +
softmax head), IO span decoding, semantic filtering of predicted entities
by cosine similarity against per-class pattern vectors, and a span-level
precision/recall/F1 harness comparing baseline vs filtered output.
"""

from .corpus import (
    ENTITY_LABELS,
    Corpus,
    CorpusSplit,
    Document,
    EntitySpan,
    TokenRef,
    load_corpus,
    split_corpus,
    synth_corpus,
    tokenize,
    write_corpus,
)
from .embedding import EmbeddingMatrix, pseudo_embed, read_embeddings, write_embeddings
from .classifier import (
    LABEL_ORDER,
    OUTSIDE,
    LinearHead,
    TokenPrediction,
    decode_spans,
    predict_tokens,
    softmax,
    train_head,
)
from .patterns import PatternRegistry, build_patterns, load_registry, save_registry
from .filtering import ScoredEntity, cosine, entity_embedding, filter_entities
from .evaluation import (
    ClassCounts,
    MatchCounts,
    MetricsReport,
    compare_reports,
    compute_metrics,
    f1_score,
    match_spans,
)
from .errors import (
    ClassifierError,
    ConfigError,
    CorpusError,
    EmbeddingError,
    EvalError,
    FilterError,
    LerError,
    PatternError,
)

__version__ = "0.1.0"
