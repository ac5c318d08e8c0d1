"""Document chunking into titled passages and JSONL persistence.

Three strategies are provided: random-length chunks (lengths 1..10 drawn with
probability proportional to the length), fixed-size windows with overlap, and
greedy word-budget packing. Random chunking uses a self-contained 64-bit
linear congruential generator so that chunk boundaries are bit-identical
across platforms and reproducible from (doc id, seed) alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .segmentation import split_sentences, tokenize

# LCG: state' = (A * state + C) mod 2^64; draws take the top 53 bits.
_LCG_A = 6364136223846793005
_LCG_C = 1442695040888963407
_MASK64 = (1 << 64) - 1

# P(N = n) proportional to n for n in 1..10; cumulative weights over total 55.
_CHUNK_LEN_CUMWEIGHTS = (1, 3, 6, 10, 15, 21, 28, 36, 45, 55)
_CHUNK_LEN_TOTAL = 55
MAX_RANDOM_CHUNK_LEN = 10


@dataclass
class Document:
    id: str
    title: str
    text: str

    def __post_init__(self) -> None:
        if not self.title.strip():
            raise ValueError(f"document {self.id!r} has an empty title")


@dataclass
class Passage:
    """A titled retrieval unit. `sentences` is the body; the title is kept
    separate so downstream stages can address it as sentence index 0."""

    id: str
    doc_id: str
    title: str
    sentences: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ValueError(f"passage {self.id!r} has no sentences")

    @property
    def text(self) -> str:
        return " ".join([self.title] + self.sentences)

    def token_count(self) -> int:
        """Tokenizer tokens over title plus body (the compression base)."""
        return sum(len(tokenize(s)) for s in [self.title] + self.sentences)


def fnv1a64(data: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 bytes; used to derive per-doc seeds."""
    h = 14695981039346656037
    for byte in data.encode("utf-8"):
        h ^= byte
        h = (h * 1099511628211) & _MASK64
    return h


class ChunkRng:
    """Minimal LCG with documented constants (see module docstring)."""

    def __init__(self, doc_id: str, seed: int):
        self.state = (fnv1a64(doc_id) ^ (seed & _MASK64)) & _MASK64

    def next_u53(self) -> int:
        self.state = (_LCG_A * self.state + _LCG_C) & _MASK64
        return self.state >> 11

    def draw_chunk_len(self) -> int:
        r = self.next_u53() % _CHUNK_LEN_TOTAL
        for n, cum in enumerate(_CHUNK_LEN_CUMWEIGHTS, start=1):
            if r < cum:
                return n
        raise AssertionError("unreachable: cumulative weights cover 0..54")


def _doc_sentences(doc: Document) -> list[str]:
    sentences = split_sentences(doc.text)
    if not sentences:
        raise ValueError(f"document {doc.id!r} yields no sentences")
    return sentences


def _make_passages(doc: Document, windows: list[tuple[int, int]], sentences: list[str]) -> list[Passage]:
    return [
        Passage(
            id=f"{doc.id}:{i}",
            doc_id=doc.id,
            title=doc.title,
            sentences=sentences[start:end],
        )
        for i, (start, end) in enumerate(windows)
    ]


def chunk_random(doc: Document, seed: int) -> list[Passage]:
    """Partition the document into chunks of 1..10 sentences, lengths drawn
    i.i.d. with weight proportional to length. Non-overlapping; the final
    chunk may be shorter than its draw."""
    sentences = _doc_sentences(doc)
    rng = ChunkRng(doc.id, seed)
    windows = []
    pos = 0
    while pos < len(sentences):
        n = rng.draw_chunk_len()
        end = min(pos + n, len(sentences))
        windows.append((pos, end))
        pos = end
    return _make_passages(doc, windows, sentences)


def chunk_fixed(doc: Document, n: int, overlap: int = 0) -> list[Passage]:
    """Sliding windows of `n` sentences starting at multiples of
    (n - overlap); the window that reaches the end is truncated and ends the
    sequence."""
    if overlap >= n:
        raise ValueError(f"overlap ({overlap}) must be smaller than n ({n})")
    if overlap < 0:
        raise ValueError("overlap must be non-negative")
    sentences = _doc_sentences(doc)
    step = n - overlap
    windows = []
    start = 0
    while True:
        end = min(start + n, len(sentences))
        windows.append((start, end))
        if end >= len(sentences):
            break
        start += step
    return _make_passages(doc, windows, sentences)


def chunk_words(doc: Document, budget: int) -> list[Passage]:
    """Greedily pack whole sentences until the next one would exceed `budget`
    words. A single sentence longer than the budget forms its own passage."""
    if budget < 1:
        raise ValueError("word budget must be >= 1")
    sentences = _doc_sentences(doc)
    counts = [len(s.split()) for s in sentences]
    windows = []
    start = 0
    used = 0
    for i, words in enumerate(counts):
        if i == start:
            used = words
            continue
        if used + words > budget:
            windows.append((start, i))
            start = i
            used = words
        else:
            used += words
    windows.append((start, len(sentences)))
    return _make_passages(doc, windows, sentences)


# ---------------------------------------------------------------------------
# JSONL persistence
# ---------------------------------------------------------------------------

class JsonlError(ValueError):
    """Malformed JSONL input; message carries file and line number."""


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise JsonlError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise JsonlError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def read_documents(path: str | Path) -> list[Document]:
    docs = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        try:
            doc = Document(id=str(obj["id"]), title=str(obj["title"]), text=str(obj["text"]))
        except KeyError as exc:
            raise JsonlError(f"{path}:{lineno}: missing field {exc}") from exc
        if doc.id in seen:
            raise JsonlError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
        seen.add(doc.id)
        docs.append(doc)
    return docs


def read_passages(path: str | Path) -> list[Passage]:
    passages = []
    for lineno, obj in _iter_jsonl(path):
        try:
            passages.append(
                Passage(
                    id=str(obj["id"]),
                    doc_id=str(obj["doc_id"]),
                    title=str(obj["title"]),
                    sentences=[str(s) for s in obj["sentences"]],
                )
            )
        except KeyError as exc:
            raise JsonlError(f"{path}:{lineno}: missing field {exc}") from exc
    return passages


def write_documents(path: str | Path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"id": doc.id, "title": doc.title, "text": doc.text},
                                ensure_ascii=False) + "\n")


def write_passages(path: str | Path, passages: Iterable[Passage]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in passages:
            fh.write(json.dumps(
                {"id": p.id, "doc_id": p.doc_id, "title": p.title, "sentences": p.sentences},
                ensure_ascii=False) + "\n")
