from __future__ import annotations

from ler.corpus import Document, EntitySpan, tokenize


def make_doc(doc_id: str, text: str, spans=(), distractors=()) -> Document:
    return Document(
        id=doc_id,
        text=text,
        tokens=tokenize(text),
        gold_entities=tuple(EntitySpan(*s) for s in spans),
        distractors=tuple(EntitySpan(*s) for s in distractors),
    )
