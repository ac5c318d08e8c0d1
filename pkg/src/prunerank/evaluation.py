"""Desk-scale evaluation harnesses over a synthetic keyword-relevance corpus.

The synthetic task is built so that gold labels are exact by construction:
each query is a unique tuple of keywords plus an answer token, and a sentence
is relevant if and only if it contains every query keyword and the answer
token. Relevant sentences repeat their keywords, distractor sentences carry
at most one keyword, and "near-miss" sentences planted in other documents
carry the full keyword tuple once but never an answer token. Because keyword
tuples are unique and only relevant sentences pair a tuple with an answer, a
sentence can never be relevant to any other query, so randomly re-paired
(query, context) cases always have exactly zero relevant sentences. The
near-misses grade the retrieval pools into distinct relevance tiers (answer
document > two near-misses > one near-miss > single-keyword noise), which
gives the rank-distillation target a reproducible ordering. Answer tokens
come from a small shared pool, which keeps every token embedding trained and
the matching rule generalizable to held-out keyword combinations.

On top of that corpus: needle-position sweeps, oracle-vs-predicted sentence
count heatmaps, threshold sweeps with an answer-containment retention proxy,
ranking agreement against the lexical teacher, chunk-granularity robustness,
and a small wall-clock benchmark.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import kendalltau

from .corpus import Document, Passage, chunk_fixed, chunk_words
from .inference import PruneResult, Pruner
from .model.config import ModelConfig, TrainConfig
from .model.network import TrainItem, make_train_item
from .model.training import TrainLog, train
from .oracle import LabeledExample, LabelingOutcome, LabelingTask, MockOracle, run_labeling
from .retrieval import LexicalIndex, ScoredPassage, build_index, normalize_pool, retrieve, score_all
from .segmentation import Vocab, build_vocab, encode_example, tokenize

_TITLE_WORDS = ("handbook", "overview", "digest", "primer", "manual")


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    """Parameters of the synthetic keyword-relevance corpus."""

    seed: int = 0
    n_docs: int = 200
    sentences_per_doc: tuple[int, int] = (3, 8)
    vocab_size: int = 120
    keywords_per_query: int = 2
    relevant_count_weights: dict[int, float] = field(
        default_factory=lambda: {0: 0.10, 1: 0.30, 2: 0.25, 3: 0.20, 4: 0.15})
    distractor_prob: float = 0.35
    answer_pool: int = 40
    keyword_repeats: int = 3
    near_miss_counts: tuple[int, ...] = (1, 2)

    def __post_init__(self) -> None:
        if self.n_docs < 1 or self.vocab_size < 1 or self.keywords_per_query < 1:
            raise ValueError("all synthetic counts must be positive")
        if self.answer_pool < 1 or self.keyword_repeats < 1:
            raise ValueError("answer_pool and keyword_repeats must be positive")
        lo, hi = self.sentences_per_doc
        if lo < 1 or hi < lo:
            raise ValueError("sentences_per_doc must be a valid positive range")
        if set(self.relevant_count_weights) - set(range(5)):
            raise ValueError("relevant counts must lie in 0..4")
        total = sum(self.relevant_count_weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"relevant-count distribution sums to {total}, not 1")


@dataclass
class SynthQuery:
    query_id: str
    text: str
    keywords: tuple[str, ...]
    answer: str
    doc_id: str


@dataclass
class SyntheticData:
    spec: SyntheticSpec
    documents: list[Document]
    queries: list[SynthQuery]
    gold_labels: dict[str, list[bool]]  # query_id -> labels over [title]+body of the paired doc
    gold_answers: dict[str, str]

    def doc_by_id(self, doc_id: str) -> Document:
        return next(d for d in self.documents if d.id == doc_id)

    def query_lookup(self) -> dict[str, SynthQuery]:
        return {q.text: q for q in self.queries}


def sentence_is_relevant(sentence: str, keywords: Sequence[str], answer: str) -> bool:
    """The relevance rule: every keyword and the answer token are present."""
    tokens = set(tokenize(sentence))
    return all(k in tokens for k in keywords) and answer in tokens


def gold_labels_for(passage: Passage, keywords: Sequence[str], answer: str) -> list[bool]:
    return [sentence_is_relevant(s, keywords, answer)
            for s in [passage.title] + passage.sentences]


def _keyword_pool_size(n_docs: int, per_query: int) -> int:
    size = max(10, per_query + 1)
    while math.comb(size, per_query) < 2 * n_docs:
        size += 1
    return size


def _sentence_text(words: list[str]) -> str:
    return " ".join([words[0].capitalize()] + words[1:]) + "."


def make_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Generate documents, keyword-tuple queries, exact gold labels, and gold
    answer strings, all deterministic from the spec seed."""
    rng = np.random.default_rng([spec.seed, 7])
    fillers = [f"fill{i:03d}" for i in range(spec.vocab_size)]
    pool = [f"key{i:03d}" for i in range(_keyword_pool_size(spec.n_docs, spec.keywords_per_query))]
    answers = [f"ans{i:03d}" for i in range(spec.answer_pool)]
    counts = sorted(spec.relevant_count_weights)
    weights = np.array([spec.relevant_count_weights[c] for c in counts])
    weights = weights / weights.sum()

    queries: list[SynthQuery] = []
    gold_answers: dict[str, str] = {}
    seen_tuples: set[tuple[str, ...]] = set()
    doc_sentences: list[list[str]] = []
    doc_titles: list[str] = []

    for qi in range(spec.n_docs):
        while True:
            keywords = tuple(sorted(rng.choice(pool, size=spec.keywords_per_query,
                                               replace=False).tolist()))
            if keywords not in seen_tuples:
                seen_tuples.add(keywords)
                break
        answer = str(rng.choice(answers))
        lo, hi = spec.sentences_per_doc
        n_sent = int(rng.integers(lo, hi + 1))
        r = int(rng.choice(counts, p=weights))
        r = min(r, n_sent)
        relevant_at = set(rng.choice(n_sent, size=r, replace=False).tolist()) if r else set()

        sentences = []
        for pos in range(n_sent):
            if pos in relevant_at:
                words = list(keywords) * spec.keyword_repeats + [answer]
                rng.shuffle(words)
            elif rng.random() < spec.distractor_prob:
                words = [str(rng.choice(pool))] + [
                    str(w) for w in rng.choice(fillers, size=int(rng.integers(3, 6)))]
                rng.shuffle(words)
            else:
                words = [str(w) for w in rng.choice(fillers, size=int(rng.integers(4, 8)))]
            sentences.append(_sentence_text(words))

        doc_sentences.append(sentences)
        doc_titles.append(f"{str(rng.choice(fillers)).capitalize()} {str(rng.choice(_TITLE_WORDS))}")
        queries.append(SynthQuery(query_id=f"q{qi:04d}", text=" ".join(keywords),
                                  keywords=keywords, answer=answer, doc_id=f"doc{qi:04d}"))
        gold_answers[f"q{qi:04d}"] = answer

    # Near-miss pass: plant full-tuple sentences (without answer tokens) in a
    # few other documents to grade each query's retrieval pool.
    if spec.n_docs > 1:
        for qi, query in enumerate(queries):
            targets = [int(x) for x in rng.choice(spec.n_docs - 1,
                                                  size=min(len(spec.near_miss_counts),
                                                           spec.n_docs - 1),
                                                  replace=False)]
            for count, offset in zip(spec.near_miss_counts, targets):
                di = (qi + 1 + offset) % spec.n_docs
                for _ in range(count):
                    words = list(query.keywords) + [
                        str(w) for w in rng.choice(fillers, size=int(rng.integers(2, 5)))]
                    rng.shuffle(words)
                    slot = int(rng.integers(0, len(doc_sentences[di]) + 1))
                    doc_sentences[di].insert(slot, _sentence_text(words))

    documents = [Document(id=f"doc{qi:04d}", title=doc_titles[qi],
                          text=" ".join(doc_sentences[qi]))
                 for qi in range(spec.n_docs)]
    # Gold labels over the final sentence lists, straight from the rule.
    gold_labels = {
        q.query_id: [sentence_is_relevant(s, q.keywords, q.answer)
                     for s in [doc_titles[qi]] + doc_sentences[qi]]
        for qi, q in enumerate(queries)
    }
    return SyntheticData(spec=spec, documents=documents, queries=queries,
                         gold_labels=gold_labels, gold_answers=gold_answers)


def whole_doc_passage(doc: Document, max_sentences: int = 64) -> Passage:
    return chunk_fixed(doc, n=max_sentences)[0]


# ---------------------------------------------------------------------------
# Labeled dataset construction (synthetic corpus -> training bundle)
# ---------------------------------------------------------------------------

@dataclass
class DatasetBundle:
    synth: SyntheticData
    passages: list[Passage]
    index: LexicalIndex
    vocab: Vocab
    train_examples: list[LabeledExample]
    heldout_examples: list[LabeledExample]
    heldout_query_ids: set[str]
    outcomes: list[LabelingOutcome]

    def passage_by_id(self) -> dict[str, Passage]:
        return {p.id: p for p in self.passages}


def build_labeled_dataset(
    synth: SyntheticData,
    pool_size: int = 5,
    heldout_fraction: float = 0.15,
    oracle=None,
    variant: str = "answer",
    jobs: int = 1,
) -> DatasetBundle:
    """Retrieve candidate pools, label them with the (mock) oracle, and split
    train/held-out by query. The query's own document is always added to its
    pool so every query contributes at least one example."""
    passages = [whole_doc_passage(doc) for doc in synth.documents]
    by_id = {p.id: p for p in passages}
    index = build_index(passages)
    oracle = oracle if oracle is not None else MockOracle({"mode": "keyword"})

    tasks: list[LabelingTask] = []
    for query in synth.queries:
        scores = score_all(index, query.text)
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:pool_size]
        pool_ids = [pid for pid, _ in ranked]
        paired = f"{query.doc_id}:0"
        if paired not in pool_ids:
            pool_ids.append(paired)
        pool = [ScoredPassage(passage_id=pid, raw_score=scores.get(pid, 0.0),
                              teacher_score=0.0) for pid in pool_ids]
        normalize_pool(pool)
        for sp in pool:
            tasks.append(LabelingTask(query_id=query.query_id, question=query.text,
                                      passage=by_id[sp.passage_id],
                                      teacher_score=sp.teacher_score))

    outcomes = run_labeling(tasks, oracle, variant=variant, jobs=jobs)
    examples = [o.example for o in outcomes if o.example is not None]

    n_heldout = max(1, int(round(heldout_fraction * len(synth.queries))))
    order = np.random.default_rng([synth.spec.seed, 999]).permutation(len(synth.queries))
    heldout_ids = {synth.queries[i].query_id for i in order[:n_heldout]}

    train_examples = [ex for ex in examples if ex.query_id not in heldout_ids]
    heldout_examples = [ex for ex in examples if ex.query_id in heldout_ids]

    corpus_texts = [p.text for p in passages] + [q.text for q in synth.queries]
    vocab = build_vocab(corpus_texts, min_freq=1)

    return DatasetBundle(synth=synth, passages=passages, index=index, vocab=vocab,
                         train_examples=train_examples,
                         heldout_examples=heldout_examples,
                         heldout_query_ids=heldout_ids, outcomes=outcomes)


def to_train_items(examples: Sequence[LabeledExample], vocab: Vocab,
                   cfg: ModelConfig) -> list[TrainItem]:
    items = []
    for ex in examples:
        tokens = encode_example(ex.query, ex.passage.title, ex.passage.sentences,
                                vocab, cfg.labeling_mode, cfg.max_len)
        items.append(make_train_item(tokens, ex.labels, ex.teacher_score))
    return items


def train_desk_model(
    bundle: DatasetBundle,
    model_cfg: ModelConfig | None = None,
    train_cfg: TrainConfig | None = None,
) -> tuple[Pruner, TrainLog]:
    """Train the shipped desk configuration on a dataset bundle."""
    if model_cfg is None:
        model_cfg = ModelConfig(vocab_size=len(bundle.vocab))
    if train_cfg is None:
        train_cfg = TrainConfig()
    items = to_train_items(bundle.train_examples, bundle.vocab, model_cfg)
    params, log = train(train_cfg, model_cfg, items)
    return Pruner(params, model_cfg, bundle.vocab), log


# ---------------------------------------------------------------------------
# Stub pruners (evaluation upper/lower bounds)
# ---------------------------------------------------------------------------

class StubPruner:
    """Evaluation stand-in deciding sentences directly, no model involved."""

    def __init__(self, decide: Callable[[str, Passage], list[bool]],
                 rank: Callable[[str, Passage], float] | None = None):
        self._decide = decide
        self._rank = rank or (lambda query, passage: 0.5)

    def prune(self, query: str, passage: Passage, threshold: float,
              enforce_title: bool = True) -> PruneResult:
        decisions = self._decide(query, passage)
        kept = [i for i, keep in enumerate(decisions) if keep]
        if enforce_title and 0 not in kept:
            kept = [0] + kept
        sentences = [passage.title] + passage.sentences
        counts = [len(tokenize(s)) for s in sentences]
        total = sum(counts)
        kept_tokens = sum(counts[i] for i in kept)
        return PruneResult(
            passage_id=passage.id,
            kept_sentences=kept,
            pruned_text=" ".join(sentences[i] for i in kept),
            compression_ratio=1.0 - kept_tokens / total,
            rank_score=self._rank(query, passage),
            token_probs=[],
        )

    def rank(self, query: str, passage: Passage) -> float:
        return self._rank(query, passage)


def gold_stub(synth: SyntheticData) -> StubPruner:
    """Upper bound: emits the exact gold decision for any known query."""
    lookup = synth.query_lookup()

    def decide(query: str, passage: Passage) -> list[bool]:
        sq = lookup[query]
        return gold_labels_for(passage, sq.keywords, sq.answer)

    return StubPruner(decide)


def constant_stub(keep: bool) -> StubPruner:
    return StubPruner(lambda query, passage: [keep] * (1 + len(passage.sentences)))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

_NORM_RE = re.compile(r"[^a-z0-9 ]+")


def normalize_answer(text: str) -> str:
    return " ".join(_NORM_RE.sub(" ", text.lower()).split())


def contains_answer(context: str, answer: str) -> bool:
    return normalize_answer(answer) in normalize_answer(context)


def sentence_f1(pruner, examples: Sequence[LabeledExample], threshold: float) -> float:
    """Micro-F1 over body sentence decisions (the force-kept title slot is
    excluded from the metric)."""
    tp = fp = fn = 0
    for ex in examples:
        result = pruner.prune(ex.query, ex.passage, threshold)
        predicted = set(result.kept_sentences) - {0}
        gold = {i for i, flag in enumerate(ex.labels) if flag and i > 0}
        tp += len(predicted & gold)
        fp += len(predicted - gold)
        fn += len(gold - predicted)
    if tp == fp == fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


# ---------------------------------------------------------------------------
# Needle-in-the-haystack
# ---------------------------------------------------------------------------

@dataclass
class NeedleCase:
    question: str
    sentences: list[str]
    answer: str


@dataclass
class NeedleReport:
    needle_len: int
    threshold: float
    retention: dict[int, float]
    mean_kept: dict[int, float]
    n_per_position: dict[int, int]

    def interior_retention(self) -> float:
        """Mean retention over non-extreme insertion slots."""
        positions = sorted(self.retention)
        interior = positions[1:-1] if len(positions) > 2 else positions
        return float(np.mean([self.retention[p] for p in interior]))


def make_needles(synth: SyntheticData, n: int = 5, lengths: Sequence[int] = (1, 2),
                 seed: int = 0) -> list[NeedleCase]:
    """Fresh keyword-tuple questions with 1- or 2-sentence needle answers,
    drawn from the same pools as the synthetic corpus."""
    spec = synth.spec
    rng = np.random.default_rng([seed, 17])
    pool = [f"key{i:03d}" for i in range(_keyword_pool_size(spec.n_docs, spec.keywords_per_query))]
    answers = [f"ans{i:03d}" for i in range(spec.answer_pool)]
    used = {q.keywords for q in synth.queries}
    cases = []
    for length in lengths:
        for _ in range(n):
            while True:
                keywords = tuple(sorted(rng.choice(pool, size=spec.keywords_per_query,
                                                   replace=False).tolist()))
                if keywords not in used:
                    used.add(keywords)
                    break
            answer = str(rng.choice(answers))
            sentences = []
            for _ in range(length):
                words = list(keywords) * spec.keyword_repeats + [answer]
                rng.shuffle(words)
                sentences.append(_sentence_text(words))
            cases.append(NeedleCase(question=" ".join(keywords),
                                    sentences=sentences, answer=answer))
    return cases


def make_hosts(synth: SyntheticData, n_hosts: int = 10, body_len: int = 6,
               seed: int = 0) -> list[Passage]:
    """Filler-only host passages; they contain no keyword or answer tokens."""
    rng = np.random.default_rng([seed, 23])
    fillers = [f"fill{i:03d}" for i in range(synth.spec.vocab_size)]
    hosts = []
    for hi in range(n_hosts):
        sentences = []
        for _ in range(body_len):
            words = [str(w) for w in rng.choice(fillers, size=int(rng.integers(4, 8)))]
            sentences.append(_sentence_text(words))
        title = f"{str(rng.choice(fillers)).capitalize()} {str(rng.choice(_TITLE_WORDS))}"
        hosts.append(Passage(id=f"host{hi:03d}", doc_id=f"host{hi:03d}",
                             title=title, sentences=sentences))
    return hosts


def needle_eval(pruner, needles: Sequence[NeedleCase], hosts: Sequence[Passage],
                positions: Sequence[int] | None, threshold: float) -> dict[int, NeedleReport]:
    """For every insertion slot, the fraction of prunes whose kept set covers
    every needle sentence, plus the mean kept-sentence count (title included).
    Slots are enumerated exhaustively when `positions` is None."""
    if not hosts:
        raise ValueError("needle evaluation requires at least one host passage")
    max_slot = min(len(h.sentences) for h in hosts)
    slots = list(positions) if positions is not None else list(range(max_slot + 1))
    by_len: dict[int, dict[int, list[tuple[bool, int]]]] = {}
    for needle in needles:
        for host in hosts:
            for pos in slots:
                if pos > len(host.sentences):
                    continue
                body = host.sentences[:pos] + needle.sentences + host.sentences[pos:]
                passage = Passage(id=f"{host.id}+{pos}", doc_id=host.doc_id,
                                  title=host.title, sentences=body)
                result = pruner.prune(needle.question, passage, threshold)
                wanted = {pos + 1 + j for j in range(len(needle.sentences))}
                hit = wanted.issubset(set(result.kept_sentences))
                bucket = by_len.setdefault(len(needle.sentences), {}).setdefault(pos, [])
                bucket.append((hit, len(result.kept_sentences)))

    reports = {}
    for length, per_pos in sorted(by_len.items()):
        retention = {p: float(np.mean([h for h, _ in obs])) for p, obs in sorted(per_pos.items())}
        mean_kept = {p: float(np.mean([c for _, c in obs])) for p, obs in sorted(per_pos.items())}
        n_per = {p: len(obs) for p, obs in sorted(per_pos.items())}
        reports[length] = NeedleReport(needle_len=length, threshold=threshold,
                                       retention=retention, mean_kept=mean_kept,
                                       n_per_position=n_per)
    return reports


# ---------------------------------------------------------------------------
# Oracle-vs-predicted count heatmap
# ---------------------------------------------------------------------------

@dataclass
class HeatmapCase:
    query: str
    passage: Passage
    gold_count: int


@dataclass
class Heatmap:
    matrix: np.ndarray          # row-normalized percentages
    row_labels: list[int]
    col_labels: list[int]
    row_counts: list[int]

    def mass_within(self, band: int, rows: Sequence[int]) -> dict[int, float]:
        """Percentage of each row's mass with |gold - predicted| <= band."""
        out = {}
        for row in rows:
            if row not in self.row_labels:
                continue
            ri = self.row_labels.index(row)
            if self.row_counts[ri] == 0:
                continue
            mass = sum(self.matrix[ri][ci] for ci, col in enumerate(self.col_labels)
                       if abs(col - row) <= band)
            out[row] = float(mass)
        return out


def make_heatmap_cases(synth: SyntheticData, query_ids: Sequence[str] | None = None,
                       zero_row_pairs: int | None = None) -> list[HeatmapCase]:
    """Pair each query with its own document (gold count by construction) and
    add a zero row by pairing queries with other queries' documents; answers
    are unique per query, so re-paired contexts always have zero relevant
    sentences."""
    wanted = set(query_ids) if query_ids is not None else None
    queries = [q for q in synth.queries if wanted is None or q.query_id in wanted]
    docs = {d.id: d for d in synth.documents}
    cases = []
    for q in queries:
        passage = whole_doc_passage(docs[q.doc_id])
        gold = sum(synth.gold_labels[q.query_id])
        cases.append(HeatmapCase(query=q.text, passage=passage, gold_count=gold))
    n_zero = zero_row_pairs if zero_row_pairs is not None else max(1, len(queries) // 2)
    position = {q.query_id: i for i, q in enumerate(synth.queries)}
    for j in range(n_zero):
        q = queries[j % len(queries)]
        other = synth.queries[(position[q.query_id] + 1 + j) % len(synth.queries)]
        if other.doc_id == q.doc_id:
            continue
        passage = whole_doc_passage(docs[other.doc_id])
        cases.append(HeatmapCase(query=q.text, passage=passage, gold_count=0))
    return cases


def count_heatmap(pruner, cases: Sequence[HeatmapCase], threshold: float) -> Heatmap:
    """Row-normalized matrix: cell (i, j) is the percentage of gold-i-sentence
    contexts pruned to j sentences; the title is excluded from both counts."""
    if not cases:
        raise ValueError("heatmap requires at least one case")
    observations = []
    for case in cases:
        result = pruner.prune(case.query, case.passage, threshold)
        predicted = len([i for i in result.kept_sentences if i != 0])
        observations.append((case.gold_count, predicted))
    max_row = max(g for g, _ in observations)
    max_col = max(p for _, p in observations)
    side = max(max_row, max_col)
    rows = list(range(side + 1))
    cols = list(range(side + 1))
    counts = np.zeros((len(rows), len(cols)))
    for gold, predicted in observations:
        counts[gold][predicted] += 1
    matrix = np.zeros_like(counts)
    row_counts = counts.sum(axis=1)
    for ri in range(len(rows)):
        if row_counts[ri] > 0:
            matrix[ri] = counts[ri] / row_counts[ri] * 100.0
    return Heatmap(matrix=matrix, row_labels=rows, col_labels=cols,
                   row_counts=[int(c) for c in row_counts])


# ---------------------------------------------------------------------------
# Threshold sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepCase:
    query: str
    passage: Passage
    answer: str | None


@dataclass
class SweepPoint:
    threshold: float
    mean_compression: float
    answer_retention: float
    compressions: list[float]


def make_sweep_cases(synth: SyntheticData, query_ids: Sequence[str] | None = None) -> list[SweepCase]:
    wanted = set(query_ids) if query_ids is not None else None
    docs = {d.id: d for d in synth.documents}
    cases = []
    for q in synth.queries:
        if wanted is not None and q.query_id not in wanted:
            continue
        has_relevant = any(synth.gold_labels[q.query_id])
        cases.append(SweepCase(query=q.text,
                               passage=whole_doc_passage(docs[q.doc_id]),
                               answer=q.answer if has_relevant else None))
    return cases


def threshold_sweep(pruner, cases: Sequence[SweepCase],
                    thresholds: Sequence[float]) -> list[SweepPoint]:
    """Mean compression and answer retention at each threshold. Retention is
    the fraction of answer-bearing cases whose pruned context still contains
    the normalized gold answer string."""
    if not cases:
        raise ValueError("threshold sweep requires at least one case")
    points = []
    for t in thresholds:
        compressions = []
        hits = 0
        n_answerable = 0
        for case in cases:
            result = pruner.prune(case.query, case.passage, t)
            compressions.append(result.compression_ratio)
            if case.answer is not None:
                n_answerable += 1
                if contains_answer(result.pruned_text, case.answer):
                    hits += 1
        retention = hits / n_answerable if n_answerable else 0.0
        points.append(SweepPoint(threshold=float(t),
                                 mean_compression=float(np.mean(compressions)),
                                 answer_retention=retention,
                                 compressions=compressions))
    return points


# ---------------------------------------------------------------------------
# Ranking agreement
# ---------------------------------------------------------------------------

def ranking_eval(
    synth: SyntheticData,
    index: LexicalIndex,
    passages_by_id: dict[str, Passage],
    scorer: Callable[[str, Passage, float], float],
    query_ids: Sequence[str] | None = None,
    k: int = 10,
) -> dict:
    """MRR@10 using the model score to reorder retrieved candidates, plus the
    mean per-query Kendall tau between model scores and teacher scores.
    Queries with degenerate pools (fewer than two candidates, or a constant
    score vector making tau undefined) are skipped in the tau average."""
    wanted = set(query_ids) if query_ids is not None else None
    taus = []
    reciprocal_ranks = []
    n_scored = 0
    for q in synth.queries:
        if wanted is not None and q.query_id not in wanted:
            continue
        pool = retrieve(index, q.text, k)
        if not pool:
            continue
        n_scored += 1
        entries = []
        for sp in pool:
            passage = passages_by_id[sp.passage_id]
            entries.append((sp, passage, scorer(q.text, passage, sp.teacher_score)))
        if len(entries) >= 2:
            model_scores = [e[2] for e in entries]
            teacher_scores = [e[0].teacher_score for e in entries]
            tau = kendalltau(model_scores, teacher_scores).statistic
            if tau == tau:  # not NaN
                taus.append(float(tau))
        order = sorted(range(len(entries)), key=lambda i: (-entries[i][2], i))
        rr = 0.0
        for rank, i in enumerate(order[:10], start=1):
            passage = entries[i][1]
            if any(gold_labels_for(passage, q.keywords, q.answer)):
                rr = 1.0 / rank
                break
        reciprocal_ranks.append(rr)
    return {
        "mrr_at_10": float(np.mean(reciprocal_ranks)) if reciprocal_ranks else 0.0,
        "kendall_tau": float(np.mean(taus)) if taus else 0.0,
        "n_queries": n_scored,
        "n_tau_queries": len(taus),
    }


# ---------------------------------------------------------------------------
# Context-granularity robustness
# ---------------------------------------------------------------------------

GRANULARITY_RECIPES: dict[str, Callable[[Document], list[Passage]]] = {
    "fixed2": lambda doc: chunk_fixed(doc, 2),
    "fixed6": lambda doc: chunk_fixed(doc, 6),
    "fixed10": lambda doc: chunk_fixed(doc, 10),
    "words100": lambda doc: chunk_words(doc, 100),
}


@dataclass
class GranularityReport:
    recipe: str
    mean_compression: float
    answer_retention: float
    baseline_retention: float
    n_queries: int


def granularity_eval(pruner, synth: SyntheticData, threshold: float,
                     recipes: dict[str, Callable[[Document], list[Passage]]] | None = None,
                     query_ids: Sequence[str] | None = None) -> dict[str, GranularityReport]:
    """Re-chunk the synthetic documents under each recipe, retrieve the top
    passage per query, prune it, and compare answer retention against the
    unpruned retrieved passage."""
    recipes = recipes if recipes is not None else GRANULARITY_RECIPES
    wanted = set(query_ids) if query_ids is not None else None
    queries = [q for q in synth.queries
               if (wanted is None or q.query_id in wanted) and any(synth.gold_labels[q.query_id])]
    reports = {}
    for name, recipe in recipes.items():
        passages = [p for doc in synth.documents for p in recipe(doc)]
        by_id = {p.id: p for p in passages}
        index = build_index(passages)
        compressions = []
        hits = baseline_hits = 0
        n = 0
        for q in queries:
            pool = retrieve(index, q.text, 1)
            if not pool:
                continue
            passage = by_id[pool[0].passage_id]
            result = pruner.prune(q.text, passage, threshold)
            compressions.append(result.compression_ratio)
            n += 1
            if contains_answer(result.pruned_text, q.answer):
                hits += 1
            if contains_answer(passage.text, q.answer):
                baseline_hits += 1
        reports[name] = GranularityReport(
            recipe=name,
            mean_compression=float(np.mean(compressions)) if compressions else 0.0,
            answer_retention=hits / n if n else 0.0,
            baseline_retention=baseline_hits / n if n else 0.0,
            n_queries=n,
        )
    return reports


# ---------------------------------------------------------------------------
# Wall-clock benchmark
# ---------------------------------------------------------------------------

def timing_bench(pruner, cases: Sequence[SweepCase], threshold: float) -> dict:
    """Serial per-pair prune latency and mean compression; reported, never
    asserted."""
    if not cases:
        raise ValueError("empty benchmark set")
    latencies = []
    compressions = []
    for case in cases:
        start = time.perf_counter()
        result = pruner.prune(case.query, case.passage, threshold)
        latencies.append(time.perf_counter() - start)
        compressions.append(result.compression_ratio)
    return {
        "mean_prune_latency_s": float(np.mean(latencies)),
        "mean_compression": float(np.mean(compressions)),
        "n": len(cases),
    }


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

def write_json_report(path: str | Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def heatmap_to_csv(path: str | Path, heatmap: Heatmap) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gold\\predicted," + ",".join(str(c) for c in heatmap.col_labels) + "\n")
        for ri, row in enumerate(heatmap.row_labels):
            cells = ",".join(f"{heatmap.matrix[ri][ci]:.4f}"
                             for ci in range(len(heatmap.col_labels)))
            fh.write(f"{row},{cells}\n")


def format_table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for ri, row in enumerate(cells):
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
        if ri == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
    return "\n".join(lines)
