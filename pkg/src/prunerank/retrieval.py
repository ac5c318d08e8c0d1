"""Lexical retrieval and teacher scoring.

A plain BM25 inverted index (k1=0.9, b=0.4) over title+body tokens serves a
double duty: candidate retrieval for dataset construction, and the bounded
teacher score used as the rank-distillation target. Teacher scores are the
per-pool min-max normalization of the raw BM25 scores, so they always live in
[0, 1]; a pool of identical raw scores maps every member to 0.5.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import Passage
from .segmentation import tokenize

BM25_K1 = 0.9
BM25_B = 0.4


@dataclass
class ScoredPassage:
    passage_id: str
    raw_score: float
    teacher_score: float


@dataclass
class LexicalIndex:
    """Inverted lists plus the corpus statistics BM25 needs."""

    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_len: dict[str, int] = field(default_factory=dict)
    n_docs: int = 0
    avg_len: float = 0.0

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def save(self, path: str | Path) -> None:
        payload = {
            "postings": {t: [[pid, tf] for pid, tf in plist] for t, plist in self.postings.items()},
            "doc_len": self.doc_len,
            "n_docs": self.n_docs,
            "avg_len": self.avg_len,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "LexicalIndex":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(
            postings={t: [(str(pid), int(tf)) for pid, tf in plist]
                      for t, plist in payload["postings"].items()},
            doc_len={str(k): int(v) for k, v in payload["doc_len"].items()},
            n_docs=int(payload["n_docs"]),
            avg_len=float(payload["avg_len"]),
        )


def build_index(passages: Sequence[Passage]) -> LexicalIndex:
    """Index title+body tokens of every passage. Duplicate ids are an error."""
    if not passages:
        raise ValueError("cannot build an index over an empty passage list")
    index = LexicalIndex()
    for passage in passages:
        if passage.id in index.doc_len:
            raise ValueError(f"duplicate passage id {passage.id!r}")
        tokens = tokenize(passage.text)
        index.doc_len[passage.id] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            index.postings.setdefault(term, []).append((passage.id, tf))
    index.n_docs = len(index.doc_len)
    index.avg_len = sum(index.doc_len.values()) / index.n_docs
    return index


def _idf(index: LexicalIndex, term: str) -> float:
    df = index.df(term)
    return math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))


def score_all(index: LexicalIndex, query: str) -> dict[str, float]:
    """Raw BM25 score for every passage matching at least one query term.

    Each distinct query term contributes once (query term frequency is not
    weighted)."""
    scores: dict[str, float] = {}
    for term in sorted(set(tokenize(query))):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = _idf(index, term)
        for pid, tf in plist:
            dl = index.doc_len[pid]
            denom = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / index.avg_len)
            scores[pid] = scores.get(pid, 0.0) + idf * tf * (BM25_K1 + 1.0) / denom
    return scores


def normalize_pool(scored: list[ScoredPassage]) -> None:
    """Fill teacher_score by min-max normalizing raw scores within the pool."""
    if not scored:
        return
    lo = min(s.raw_score for s in scored)
    hi = max(s.raw_score for s in scored)
    if hi <= lo:
        for s in scored:
            s.teacher_score = 0.5
        return
    for s in scored:
        s.teacher_score = (s.raw_score - lo) / (hi - lo)


def retrieve(index: LexicalIndex, query: str, k: int) -> list[ScoredPassage]:
    """Top-k passages by BM25, descending; ties broken by passage id. The
    teacher score is normalized over the returned pool. Queries with no
    matching term yield an empty list."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = score_all(index, query)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    pool = [ScoredPassage(passage_id=pid, raw_score=s, teacher_score=0.0) for pid, s in ranked]
    normalize_pool(pool)
    return pool
