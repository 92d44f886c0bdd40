"""Annotated legal document corpora: types, loading, splitting, synthesis.

A corpus is a line-delimited UTF-8 file, one JSON record per document:

    {"id": "...", "text": "...",
     "tokens": [{"start": 0, "end": 5}, ...],        # optional
     "entities": [{"start_token": 0, "end_token": 2, "label": "PARTY"}, ...],
     "distractors": [...]}                            # optional, same shape

When ``tokens`` is absent the built-in tokenizer is applied to ``text``.
``distractors`` marks synthetic tokens engineered to look like entities to
the classifier while sitting far from their class pattern in embedding
space; real corpora never carry them.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import CorpusError

PARTY = "PARTY"
DATE = "DATE"
MONEY = "MONEY"
PROVISION = "PROVISION"

ENTITY_LABELS: tuple[str, ...] = (PARTY, DATE, MONEY, PROVISION)

# Characters split off the edges of whitespace-delimited chunks.
_PUNCT = set(".,;:()\"'$%")


@dataclass(frozen=True)
class TokenRef:
    """Half-open character range [start, end) of one token in the text."""

    start: int
    end: int


@dataclass(frozen=True)
class EntitySpan:
    """Half-open token range [start_token, end_token) with an entity label."""

    start_token: int
    end_token: int
    label: str

    def __post_init__(self):
        if not (0 <= self.start_token < self.end_token):
            raise CorpusError(
                f"span out of range: start_token={self.start_token}, "
                f"end_token={self.end_token}"
            )
        if self.label not in ENTITY_LABELS:
            raise CorpusError(
                f"unknown label {self.label!r}; expected one of {', '.join(ENTITY_LABELS)}"
            )


@dataclass(frozen=True)
class Document:
    """One tokenized document with gold entity annotations."""

    id: str
    text: str
    tokens: tuple[TokenRef, ...]
    gold_entities: tuple[EntitySpan, ...] = ()
    distractors: tuple[EntitySpan, ...] = ()

    def __post_init__(self):
        n = len(self.text)
        prev_end = 0
        for tok in self.tokens:
            if not (0 <= tok.start < tok.end <= n):
                raise CorpusError(
                    f"token range ({tok.start},{tok.end}) outside text of length {n}"
                )
            if tok.start < prev_end:
                raise CorpusError(
                    f"token ranges overlap or are out of order at ({tok.start},{tok.end})"
                )
            prev_end = tok.end
        _check_spans(self.gold_entities, len(self.tokens), "gold")
        _check_spans(self.distractors, len(self.tokens), "distractor")
        occupied = [False] * len(self.tokens)
        for span in self.gold_entities + self.distractors:
            for i in range(span.start_token, span.end_token):
                if occupied[i]:
                    raise CorpusError(
                        f"distractor span ({span.start_token},{span.end_token}) "
                        f"overlaps a gold span"
                    )
                occupied[i] = True

    def token_text(self, index: int) -> str:
        tok = self.tokens[index]
        return self.text[tok.start:tok.end]


def _check_spans(spans: tuple[EntitySpan, ...], n_tokens: int, kind: str) -> None:
    seen: list[EntitySpan] = []
    for span in spans:
        if span.end_token > n_tokens:
            raise CorpusError(
                f"{kind} span out of range: ({span.start_token},{span.end_token}) "
                f"with {n_tokens} tokens"
            )
        for other in seen:
            if span.start_token < other.end_token and other.start_token < span.end_token:
                raise CorpusError(
                    f"overlapping {kind} spans: ({other.start_token},{other.end_token}) "
                    f"and ({span.start_token},{span.end_token})"
                )
        seen.append(span)


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of documents with unique ids."""

    documents: tuple[Document, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    def __iter__(self):
        return iter(self.documents)

    def __len__(self) -> int:
        return len(self.documents)


@dataclass(frozen=True)
class CorpusSplit:
    """Document-level train/test partition of a corpus."""

    train: tuple[Document, ...]
    test: tuple[Document, ...]
    ratio: float
    seed: int


def tokenize(text: str) -> tuple[TokenRef, ...]:
    """Split ``text`` into tokens, deterministically.

    Chunks are separated by Unicode whitespace; leading and trailing
    punctuation characters (.,;:()"'$%) are peeled off into single-character
    tokens. Internal punctuation (e.g. "5,000") stays attached.
    """
    tokens: list[TokenRef] = []
    pos, n = 0, len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        start = pos
        while pos < n and not text[pos].isspace():
            pos += 1
        tokens.extend(_split_edge_punct(text, start, pos))
    return tuple(tokens)


def _split_edge_punct(text: str, start: int, end: int) -> list[TokenRef]:
    out: list[TokenRef] = []
    while start < end and text[start] in _PUNCT:
        out.append(TokenRef(start, start + 1))
        start += 1
    trail: list[TokenRef] = []
    while end > start and text[end - 1] in _PUNCT:
        trail.append(TokenRef(end - 1, end))
        end -= 1
    if start < end:
        out.append(TokenRef(start, end))
    out.extend(reversed(trail))
    return out


def _span_from_record(rec: dict, kind: str) -> EntitySpan:
    try:
        return EntitySpan(int(rec["start_token"]), int(rec["end_token"]), rec["label"])
    except KeyError as exc:
        raise CorpusError(f"{kind} span record missing field {exc}") from None


def load_corpus(path: str | Path) -> Corpus:
    """Load a line-delimited corpus file, validating every document.

    Raises CorpusError naming the offending line on malformed records,
    out-of-range or overlapping spans, unknown labels, and duplicate ids.
    """
    path = Path(path)
    docs: list[Document] = []
    ids: set[str] = set()
    try:
        handle = path.open(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                doc = _parse_record(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed record: {exc.msg}") from None
            except CorpusError as exc:
                raise CorpusError(f"line {lineno}: {exc.message}") from None
            if doc.id in ids:
                raise CorpusError(f"line {lineno}: duplicate document id {doc.id!r}")
            ids.add(doc.id)
            docs.append(doc)
    return Corpus(tuple(docs))


def _parse_record(line: str) -> Document:
    rec = json.loads(line)
    if not isinstance(rec, dict):
        raise CorpusError("malformed record: expected a JSON object")
    for key in ("id", "text"):
        if key not in rec:
            raise CorpusError(f"malformed record: missing field {key!r}")
    if "tokens" in rec:
        tokens = tuple(TokenRef(int(t["start"]), int(t["end"])) for t in rec["tokens"])
    else:
        tokens = tokenize(rec["text"])
    gold = tuple(_span_from_record(s, "gold") for s in rec.get("entities", []))
    distractors = tuple(_span_from_record(s, "distractor") for s in rec.get("distractors", []))
    return Document(
        id=str(rec["id"]),
        text=rec["text"],
        tokens=tokens,
        gold_entities=gold,
        distractors=distractors,
    )


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the line-delimited format; byte-deterministic."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for doc in corpus:
            rec: dict = {
                "id": doc.id,
                "text": doc.text,
                "tokens": [{"start": t.start, "end": t.end} for t in doc.tokens],
                "entities": [_span_to_record(s) for s in doc.gold_entities],
            }
            if doc.distractors:
                rec["distractors"] = [_span_to_record(s) for s in doc.distractors]
            handle.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
            handle.write("\n")


def _span_to_record(span: EntitySpan) -> dict:
    return {
        "start_token": span.start_token,
        "end_token": span.end_token,
        "label": span.label,
    }


def split_corpus(corpus: Corpus, ratio: float, seed: int) -> CorpusSplit:
    """Partition a corpus into train/test by document, deterministically.

    |train| = round(ratio * N), rounding half up. Membership is a seeded
    shuffle; the original corpus order is preserved within each side.
    """
    if not 0.0 < ratio < 1.0:
        raise CorpusError(f"split ratio must be in (0,1), got {ratio}")
    n = len(corpus)
    if n < 2:
        raise CorpusError(f"cannot split a corpus of {n} document(s)")
    k = int(math.floor(ratio * n + 0.5))
    order = list(range(n))
    random.Random(seed).shuffle(order)
    train_idx = sorted(order[:k])
    test_idx = sorted(order[k:])
    docs = corpus.documents
    return CorpusSplit(
        train=tuple(docs[i] for i in train_idx),
        test=tuple(docs[i] for i in test_idx),
        ratio=ratio,
        seed=seed,
    )


# --- synthetic corpus generation ---------------------------------------------

_PARTIES = (
    "Acme Corp", "Beta Holdings", "Gamma Partners LLC", "Delta Industries",
    "John Walker", "Meridian Trust", "Northwind Services", "Orchid Capital",
    "Pinnacle Group", "Sterling Associates",
)
_DATES = (
    "12 January 2020", "3 March 2021", "30 June 2019", "1 September 2022",
    "15 October 2023", "28 February 2024", "7 July 2018", "19 April 2025",
)
_MONEYS = (
    "$5,000", "$12,500.00", "$250,000", "$1,750", "$98,400.50",
    "$640", "$2,000,000", "$37,250",
)
_PROVISIONS = (
    "Section 4.2", "Article 9", "Clause 14", "Section 12", "Article 3.1",
    "Clause 7.4", "Section 21", "Article 16",
)

_FILLERS = {PARTY: _PARTIES, DATE: _DATES, MONEY: _MONEYS, PROVISION: _PROVISIONS}

# Each template references every entity label at least once so that any
# document-level split leaves training examples for all four classes.
_TEMPLATES = (
    "Under {PROVISION}, {PARTY} shall pay {MONEY} to {PARTY} on {DATE}.",
    "{PARTY} agrees to remit {MONEY} no later than {DATE} pursuant to {PROVISION}.",
    "Pursuant to {PROVISION}, a deposit of {MONEY} was received by {PARTY} on {DATE}.",
    "{PARTY} terminated the agreement dated {DATE} under {PROVISION} and forfeited {MONEY}.",
    "On {DATE}, {PARTY} invoiced {PARTY} for {MONEY} as required by {PROVISION}.",
)

# Sentences carrying distractor slots; the slot word is never adjacent to an
# entity filler, so predicted distractor spans cannot merge into real spans.
_DISTRACTOR_TEMPLATES = (
    "The parties acknowledge the {D} schedule annexed hereto.",
    "Any {D} notice and any {D} waiver survive termination.",
    "Such {D} rider forms part of this instrument.",
)

_DISTRACTOR_WORDS = (
    "heretofore", "aforesaid", "witnesseth", "thereunto", "hereinabove",
    "whereof", "forthwith", "hereunder",
)


def synth_corpus(n_docs: int, noise: float, seed: int) -> Corpus:
    """Generate a deterministic synthetic corpus of legal-like sentences.

    Every document carries gold spans of all four labels. A ``noise``
    fraction of documents (count = round(noise * n_docs), chosen by the
    seeded RNG) additionally contains distractor tokens annotated in
    ``Document.distractors``.
    """
    if n_docs < 1:
        raise CorpusError(f"n_docs must be >= 1, got {n_docs}")
    if not 0.0 <= noise <= 1.0:
        raise CorpusError(f"noise must be in [0,1], got {noise}")
    rng = random.Random(seed)
    n_flagged = int(math.floor(noise * n_docs + 0.5))
    flagged = set(rng.sample(range(n_docs), n_flagged))
    docs = []
    for i in range(n_docs):
        docs.append(_synth_document(f"doc-{i:04d}", rng, with_distractors=i in flagged))
    return Corpus(tuple(docs))


def _synth_document(doc_id: str, rng: random.Random, with_distractors: bool) -> Document:
    parts: list[str] = []
    char_spans: list[tuple[int, int, str]] = []  # filler char ranges
    distractor_chars: list[tuple[int, int, str]] = []
    pos = 0

    def emit(piece: str) -> tuple[int, int]:
        nonlocal pos
        start = pos
        parts.append(piece)
        pos += len(piece)
        return start, pos

    sentences = [rng.choice(_TEMPLATES)]
    if with_distractors:
        sentences.extend(rng.choice(_DISTRACTOR_TEMPLATES) for _ in range(rng.randint(1, 2)))
    for si, template in enumerate(sentences):
        if si:
            emit(" ")
        for chunk in _template_chunks(template):
            if chunk in ENTITY_LABELS:
                start, end = emit(rng.choice(_FILLERS[chunk]))
                char_spans.append((start, end, chunk))
            elif chunk == "D":
                start, end = emit(rng.choice(_DISTRACTOR_WORDS))
                distractor_chars.append((start, end, rng.choice(ENTITY_LABELS)))
            else:
                emit(chunk)

    text = "".join(parts)
    tokens = tokenize(text)
    gold = tuple(_chars_to_span(cs, ce, label, tokens) for cs, ce, label in char_spans)
    distractors = tuple(_chars_to_span(cs, ce, label, tokens) for cs, ce, label in distractor_chars)
    return Document(id=doc_id, text=text, tokens=tokens,
                    gold_entities=gold, distractors=distractors)


def _template_chunks(template: str):
    """Yield literal text and slot names ('PARTY', ..., 'D') in order."""
    pos = 0
    while pos < len(template):
        brace = template.find("{", pos)
        if brace == -1:
            yield template[pos:]
            return
        if brace > pos:
            yield template[pos:brace]
        close = template.index("}", brace)
        yield template[brace + 1:close]
        pos = close + 1


def _chars_to_span(cs: int, ce: int, label: str, tokens: tuple[TokenRef, ...]) -> EntitySpan:
    covered = [i for i, t in enumerate(tokens) if t.start >= cs and t.end <= ce]
    if not covered:
        raise CorpusError(f"filler at chars ({cs},{ce}) covers no tokens")
    return EntitySpan(covered[0], covered[-1] + 1, label)
