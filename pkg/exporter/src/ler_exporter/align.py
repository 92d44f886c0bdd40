"""Alignment between corpus tokens and encoder sub-word pieces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class ExportError(Exception):
    """Raised for encoder, alignment, or output failures."""

    module = "bert_exporter"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


@dataclass(frozen=True)
class AlignmentMap:
    """Per corpus token: the encoder piece indices covering it.

    Piece lists are non-empty, internally ordered, and disjoint across
    tokens (pieces of token i all precede pieces of token i+1).
    """

    pieces_per_token: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        last = -1
        for token_index, pieces in enumerate(self.pieces_per_token):
            if not pieces:
                raise ExportError(f"token {token_index} maps to no encoder pieces")
            for piece in pieces:
                if piece <= last:
                    raise ExportError(
                        f"piece indices out of order at token {token_index}"
                    )
                last = piece


def alignment_from_word_ids(word_ids: Sequence[int | None], n_tokens: int) -> AlignmentMap:
    """Build the map from a fast tokenizer's per-piece word ids.

    ``None`` entries (special tokens) are skipped. Raises ExportError when
    some corpus token ends up with no pieces, e.g. a token the encoder's
    normalizer deletes entirely.
    """
    pieces: list[list[int]] = [[] for _ in range(n_tokens)]
    for piece_index, word_id in enumerate(word_ids):
        if word_id is None:
            continue
        if not 0 <= word_id < n_tokens:
            raise ExportError(
                f"encoder reported word id {word_id} outside 0..{n_tokens - 1}"
            )
        pieces[word_id].append(piece_index)
    for token_index, lst in enumerate(pieces):
        if not lst:
            raise ExportError(f"token {token_index} maps to no encoder pieces")
    return AlignmentMap(tuple(tuple(lst) for lst in pieces))
