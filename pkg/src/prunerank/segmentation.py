"""Sentence splitting, word-level tokenization, and model input assembly.

The tokenizer is intentionally simple: lowercased words (apostrophes allowed
inside a word) plus single punctuation characters. Sentence splitting is
rule-based on terminal punctuation with an abbreviation stop-list shipped as
a data file. Both are deterministic and platform-independent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Literal

# Reserved vocabulary slots. These names cannot collide with corpus tokens
# because the tokenizer never emits multi-character punctuation runs.
PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
SEP_ID = 3
SENT_ID = 4
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<sep>", "<sent>")

LabelingMode = Literal["token-level", "sentence-marker"]

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*|[^\sa-z0-9]")
_TERMINAL_RE = re.compile(r"[.!?]+")


def tokenize(text: str) -> list[str]:
    """Lowercased word/punctuation tokens; whitespace is never a token."""
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# Sentence splitting
# ---------------------------------------------------------------------------

def _load_default_abbreviations() -> frozenset[str]:
    data = resources.files("prunerank.data").joinpath("abbreviations.txt").read_text("utf-8")
    entries = []
    for line in data.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            entries.append(line)
    return frozenset(entries)


_DEFAULT_ABBREVIATIONS: frozenset[str] | None = None


def default_abbreviations() -> frozenset[str]:
    global _DEFAULT_ABBREVIATIONS
    if _DEFAULT_ABBREVIATIONS is None:
        _DEFAULT_ABBREVIATIONS = _load_default_abbreviations()
    return _DEFAULT_ABBREVIATIONS


def load_abbreviations(path: str | Path) -> frozenset[str]:
    """Read an abbreviation stop-list: one token per line, '#' comments."""
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            out.append(line)
    return frozenset(out)


def _trailing_token(text: str, end: int) -> str:
    """Maximal non-whitespace run ending at position `end` (exclusive)."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end]


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    """Split text into sentences on terminal punctuation.

    A boundary is placed after a run of ``. ! ?`` when it is followed by
    whitespace and the next non-space character is an uppercase letter or a
    digit. A lone period does not end a sentence when the word it terminates
    is on the abbreviation stop-list. Empty input yields an empty list.
    """
    if abbreviations is None:
        abbreviations = default_abbreviations()
    if not text.strip():
        return []

    cut_points: list[int] = []
    for match in _TERMINAL_RE.finditer(text):
        end = match.end()
        if end >= len(text):
            continue
        if not text[end].isspace():
            continue
        follow = end
        while follow < len(text) and text[follow].isspace():
            follow += 1
        if follow >= len(text):
            continue
        nxt = text[follow]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if match.group() == ".":
            token = _trailing_token(text, end).lower()
            token = token.lstrip("\"'([{<-")
            if token in abbreviations:
                continue
        cut_points.append(end)

    sentences = []
    prev = 0
    for cut in cut_points:
        piece = text[prev:cut].strip()
        if piece:
            sentences.append(piece)
        prev = cut
    tail = text[prev:].strip()
    if tail:
        sentences.append(tail)
    return sentences


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

@dataclass
class Vocab:
    """Token-to-id map with fixed reserved slots and dense ids."""

    token_to_id: dict[str, int] = field(default_factory=dict)
    min_freq: int = 1

    def __post_init__(self) -> None:
        for tok, tid in zip(RESERVED_TOKENS, range(len(RESERVED_TOKENS))):
            existing = self.token_to_id.get(tok)
            if existing is not None and existing != tid:
                raise ValueError(f"reserved token {tok!r} must have id {tid}")
            self.token_to_id.setdefault(tok, tid)

    def __len__(self) -> int:
        return len(self.token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(tok, UNK_ID) for tok in tokens]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.token_to_id, fh, ensure_ascii=False, indent=0, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        with open(path, encoding="utf-8") as fh:
            mapping = json.load(fh)
        vocab = cls(token_to_id={str(k): int(v) for k, v in mapping.items()})
        vocab._check_dense()
        return vocab

    def _check_dense(self) -> None:
        ids = sorted(self.token_to_id.values())
        if ids != list(range(len(ids))):
            raise ValueError("vocab ids must be dense 0..|V|-1")


def build_vocab(corpus: Iterable[str], min_freq: int = 1) -> Vocab:
    """Count lowercased tokens over `corpus` and keep those with
    frequency >= min_freq. Ids are assigned by frequency descending, then
    lexicographically, after the reserved slots."""
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts: dict[str, int] = {}
    for text in corpus:
        for tok in tokenize(text):
            counts[tok] = counts.get(tok, 0) + 1
    kept = [(tok, n) for tok, n in counts.items() if n >= min_freq]
    kept.sort(key=lambda kv: (-kv[1], kv[0]))
    mapping = {tok: i for i, tok in enumerate(RESERVED_TOKENS)}
    next_id = len(RESERVED_TOKENS)
    for tok, _ in kept:
        mapping[tok] = next_id
        next_id += 1
    return Vocab(token_to_id=mapping, min_freq=min_freq)


# ---------------------------------------------------------------------------
# Model input assembly
# ---------------------------------------------------------------------------

@dataclass
class TokenizedExample:
    """Token ids plus the span bookkeeping the model and pruner need.

    Layout is ``[BOS, query..., SEP, passage...]``. In sentence-marker mode a
    SENT token precedes each sentence and each span starts at its marker.
    ``sentence_spans[0]`` is always the passage title. ``label_mask`` is true
    exactly at the positions that carry pruning labels: every passage token in
    token-level mode, only the SENT markers in sentence-marker mode.
    """

    token_ids: list[int]
    sentence_spans: list[tuple[int, int]]
    query_span: tuple[int, int]
    label_mask: list[bool]
    mode: LabelingMode

    def __len__(self) -> int:
        return len(self.token_ids)


class EncodingError(ValueError):
    """Raised when a (query, passage) pair cannot fit the length budget."""


def encode_example(
    query: str,
    title: str,
    sentences: list[str],
    vocab: Vocab,
    mode: LabelingMode = "token-level",
    max_len: int = 512,
) -> TokenizedExample:
    """Assemble the model input for one query/passage pair.

    The title is sentence index 0. When the sequence would exceed `max_len`,
    trailing whole sentences are dropped; a sentence is never split. If not
    even the title fits, an EncodingError is raised.
    """
    if not title.strip():
        raise EncodingError("passage title must be non-empty")
    query_ids = vocab.encode(tokenize(query))
    all_sentences = [title] + list(sentences)
    sent_ids = [vocab.encode(tokenize(s)) for s in all_sentences]
    if any(len(ids) == 0 for ids in sent_ids):
        raise EncodingError("every sentence must yield at least one token")

    marker = 1 if mode == "sentence-marker" else 0
    base = 1 + len(query_ids) + 1  # BOS + query + SEP
    budget = max_len - base
    n_keep = 0
    used = 0
    for ids in sent_ids:
        need = len(ids) + marker
        if used + need > budget:
            break
        used += need
        n_keep += 1
    if n_keep == 0:
        raise EncodingError(
            f"query of {len(query_ids)} tokens leaves no room for any passage "
            f"sentence within max_len={max_len}"
        )

    token_ids = [BOS_ID] + query_ids + [SEP_ID]
    query_span = (1, 1 + len(query_ids))
    spans: list[tuple[int, int]] = []
    for ids in sent_ids[:n_keep]:
        start = len(token_ids)
        if marker:
            token_ids.append(SENT_ID)
        token_ids.extend(ids)
        spans.append((start, len(token_ids)))

    mask = [False] * len(token_ids)
    if mode == "sentence-marker":
        for start, _ in spans:
            mask[start] = True
    else:
        for start, end in spans:
            for k in range(start, end):
                mask[k] = True

    return TokenizedExample(
        token_ids=token_ids,
        sentence_spans=spans,
        query_span=query_span,
        label_mask=mask,
        mode=mode,
    )


def iter_span_tokens(example: TokenizedExample) -> Iterator[tuple[int, list[int]]]:
    """Yield (sentence index, token ids) pairs, skipping SENT markers."""
    skip = 1 if example.mode == "sentence-marker" else 0
    for idx, (start, end) in enumerate(example.sentence_spans):
        yield idx, example.token_ids[start + skip:end]
