"""
Fixed-budget chunking with sentence snapping.

A chunk holds at most chunk_size characters. When the budget ends mid-text
the chunk is cut after the last sentence terminator inside the budget; a
budget with no terminator is cut hard. No overlap. Chunk ids are
"<doc id>:<ordinal>".
"""

import re

from app.schemas.extraction import Chunk, Document

DEFAULT_CHUNK_SIZE = 1200

_SENTENCE_END = re.compile(r"[.!?。！？](?=\s|$)")


def chunk_document(document: Document, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[Chunk]:
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {chunk_size}")
    text = document.text
    chunks: list[Chunk] = []
    start = 0
    while start < len(text):
        while start < len(text) and text[start].isspace():
            start += 1
        if start >= len(text):
            break
        end = min(start + chunk_size, len(text))
        if end < len(text):
            window = text[start:end]
            boundaries = [m.end() for m in _SENTENCE_END.finditer(window)]
            if boundaries and boundaries[-1] > 0:
                end = start + boundaries[-1]
        piece = text[start:end].strip()
        if piece:
            chunks.append(Chunk(id=f"{document.id}:{len(chunks)}", doc_id=document.id, text=piece))
        start = end
    return chunks


def chunk_corpus(documents: list[Document], chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[Chunk]:
    return [chunk for doc in documents for chunk in chunk_document(doc, chunk_size)]
