"""Turning model outputs into pruned contexts.

Pipeline for token-level models: threshold the per-token probabilities
(keep when prob >= T), round to whole sentences by strict majority of kept
tokens, then force the title (sentence 0) back in. Sentence-marker models
threshold the per-marker probabilities directly. The compression ratio is
measured in tokenizer tokens over passage tokens only: the query is excluded,
the title included, and sentences dropped by length truncation count as
pruned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Passage
from .model.config import ModelConfig
from .model.network import ForwardOutput, Params, forward
from .segmentation import TokenizedExample, Vocab, encode_example, tokenize


@dataclass
class PruneResult:
    """Outcome of pruning one (query, passage) pair. `kept_sentences` are
    strictly increasing sentence indices with 0 = title."""

    passage_id: str
    kept_sentences: list[int]
    pruned_text: str
    compression_ratio: float
    rank_score: float
    token_probs: list[float]

    def to_json(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "kept_sentences": self.kept_sentences,
            "pruned_text": self.pruned_text,
            "compression_ratio": self.compression_ratio,
            "rank_score": self.rank_score,
        }


def binarize(token_probs: np.ndarray, spans: Sequence[tuple[int, int]], threshold: float) -> np.ndarray:
    """Per-token keep flags: prob >= threshold on passage tokens, false on
    query and special positions."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    flags = np.zeros(len(token_probs), dtype=bool)
    for start, end in spans:
        flags[start:end] = token_probs[start:end] >= threshold
    return flags


def sentence_round(keep_flags: np.ndarray, spans: Sequence[tuple[int, int]]) -> list[bool]:
    """A sentence survives only if strictly more than half its tokens are
    flagged."""
    decisions = []
    for start, end in spans:
        width = end - start
        kept = int(keep_flags[start:end].sum())
        decisions.append(kept / width > 0.5)
    return decisions


def sentence_decisions(output: ForwardOutput, encoded: TokenizedExample,
                       threshold: float) -> list[bool]:
    """Per-sentence keep decisions for either labeling mode."""
    if encoded.mode == "sentence-marker":
        if not (0.0 <= threshold <= 1.0):
            raise ValueError("threshold must lie in [0, 1]")
        return [bool(output.token_probs[start] >= threshold)
                for start, _ in encoded.sentence_spans]
    flags = binarize(output.token_probs, encoded.sentence_spans, threshold)
    return sentence_round(flags, encoded.sentence_spans)


def assemble_result(output: ForwardOutput, encoded: TokenizedExample,
                    passage: Passage, threshold: float,
                    enforce_title: bool = True) -> PruneResult:
    """Build a PruneResult from a forward pass (no extra model evaluation)."""
    decisions = sentence_decisions(output, encoded, threshold)
    kept = [i for i, keep in enumerate(decisions) if keep]
    if enforce_title and 0 not in kept:
        kept = [0] + kept
    sentences = [passage.title] + passage.sentences
    token_counts = [len(tokenize(s)) for s in sentences]
    total = sum(token_counts)
    kept_tokens = sum(token_counts[i] for i in kept)
    return PruneResult(
        passage_id=passage.id,
        kept_sentences=kept,
        pruned_text=" ".join(sentences[i] for i in kept),
        compression_ratio=1.0 - kept_tokens / total,
        rank_score=output.rank_score,
        token_probs=[float(p) for p in output.token_probs],
    )


class Pruner:
    """Stateless inference wrapper around immutable model parameters."""

    def __init__(self, params: Params, cfg: ModelConfig, vocab: Vocab):
        self.params = params
        self.cfg = cfg
        self.vocab = vocab

    def encode(self, query: str, passage: Passage) -> TokenizedExample:
        return encode_example(query, passage.title, passage.sentences,
                              self.vocab, self.cfg.labeling_mode, self.cfg.max_len)

    def forward_passage(self, query: str, passage: Passage) -> tuple[ForwardOutput, TokenizedExample]:
        encoded = self.encode(query, passage)
        return forward(self.params, self.cfg, encoded), encoded

    def prune(self, query: str, passage: Passage, threshold: float,
              enforce_title: bool = True) -> PruneResult:
        output, encoded = self.forward_passage(query, passage)
        return assemble_result(output, encoded, passage, threshold, enforce_title)

    def rank(self, query: str, passage: Passage) -> float:
        output, _ = self.forward_passage(query, passage)
        return output.rank_score

    def rerank_and_prune(self, query: str, passages: Sequence[Passage],
                         threshold: float, k: int,
                         enforce_title: bool = True) -> list[PruneResult]:
        """One forward pass per passage yields both the rank score and the
        pruning probabilities; results come back sorted by rank score
        descending (ties keep input order), truncated to the top k."""
        if k < 1:
            raise ValueError("k must be >= 1")
        results = []
        for passage in passages:
            output, encoded = self.forward_passage(query, passage)
            results.append(assemble_result(output, encoded, passage,
                                           threshold, enforce_title))
        order = sorted(range(len(results)),
                       key=lambda i: (-results[i].rank_score, i))
        return [results[i] for i in order[:k]]


def write_prune_results(path: str | Path, rows: Sequence[tuple[str, PruneResult]]) -> None:
    """Batch-mode output: one JSON object per (query, result) pair."""
    with open(path, "w", encoding="utf-8") as fh:
        for query, result in rows:
            record = {"query": query}
            record.update(result.to_json())
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
