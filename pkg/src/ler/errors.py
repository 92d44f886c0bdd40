"""Exception types shared across the pipeline.

Every error carries the name of the module it originated in so the CLI can
emit a single machine-parsable line (`module=... message=...`) on failure.
"""

from __future__ import annotations


class LerError(Exception):
    """Base class for all pipeline errors."""

    module = "ler"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class CorpusError(LerError):
    module = "corpus"


class EmbeddingError(LerError):
    module = "embedding"


class ClassifierError(LerError):
    module = "classifier"


class PatternError(LerError):
    module = "patterns"


class FilterError(LerError):
    module = "filter"


class EvalError(LerError):
    module = "eval"


class ConfigError(LerError):
    module = "cli"
