"""Silver-label generation: prompts, citation parsing, filtering, statistics.

The labeling oracle is any system that reads a numbered context and answers
with bracketed sentence citations. Two transports are provided: a minimal
chat-completion HTTP client (endpoint and key from PROVENCE_ORACLE_URL /
PROVENCE_ORACLE_KEY), and a scripted mock driven by a JSON rules file for
fully offline, deterministic runs.

Sentence numbering in prompts is 1-based and the title is rendered as
sentence [1]; a cited index 0 is accepted and treated as the title slot.
"""

from __future__ import annotations

import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Protocol, Sequence

from .corpus import Passage, _iter_jsonl
from .segmentation import tokenize

PromptVariant = Literal["answer", "relevance", "straightforward"]
PROMPT_VARIANTS: tuple[str, ...] = ("answer", "relevance", "straightforward")

ORACLE_URL_ENV = "PROVENCE_ORACLE_URL"
ORACLE_KEY_ENV = "PROVENCE_ORACLE_KEY"

_INSTRUCTION_ANSWER = (
    'Answer the Question, using ONLY information provided in the Context. '
    'If no useful information is provided, you MUST output "No answer". '
    'If some parts of the Context are used to answer, you MUST cite ALL the '
    'corresponding sentences. Use the symbols [ ] to indicate when a fact '
    'comes from a sentence in the context, e.g [0] for a fact from sentence 0. '
    'You should only answer the given question and should not provide any '
    'additional information.'
)

_INSTRUCTION_RELEVANCE = (
    'List any information in the Context that is relevant to the given '
    'Question. If no relevant information is provided, you MUST output '
    '"No answer". If some parts of the Context are relevant, you MUST cite '
    'ALL the corresponding sentences. Use the symbols [ ] to indicate when a '
    'fact comes from a sentence in the context, e.g [0] for a fact from '
    'sentence 0. You should only list information from the Context and '
    'should not provide any additional information.'
)

_INSTRUCTION_STRAIGHTFORWARD = (
    'Output indexes of sentences relevant to the given question. Use the '
    'symbols [ ] to indicate the sentence indexes, e.g [1] for sentence 1. '
    'If no sentence is relevant, you MUST output "No answer".'
)

_INSTRUCTIONS: dict[str, str] = {
    "answer": _INSTRUCTION_ANSWER,
    "relevance": _INSTRUCTION_RELEVANCE,
    "straightforward": _INSTRUCTION_STRAIGHTFORWARD,
}


def build_prompt(question: str, passage: Passage, variant: PromptVariant = "answer") -> str:
    """Render the numbered-context labeling prompt. The title is sentence [1];
    variants differ only in the instruction paragraph."""
    if variant not in _INSTRUCTIONS:
        raise ValueError(f"unknown prompt variant {variant!r}")
    numbered = " ".join(
        f"[{i}] {s}" for i, s in enumerate([passage.title] + passage.sentences, start=1)
    )
    return f"Question: {question}\nContext: {numbered}\n{_INSTRUCTIONS[variant]}"


# ---------------------------------------------------------------------------
# Citation parsing
# ---------------------------------------------------------------------------

_CITATION_RE = re.compile(r"\[\s*(\d+(?:\s*,\s*\d+)*)\s*\]")
_NO_ANSWER_RE = re.compile(r"no\s+answer", re.IGNORECASE)

ParseKind = Literal["cited", "no_answer", "unparseable"]


@dataclass(frozen=True)
class ParseResult:
    """Outcome of parsing an oracle response.

    `indices` is non-empty only for kind == "cited" and uses 1-based prompt
    numbering (1 = title). Index 0 in the raw text is mapped to the title."""

    kind: ParseKind
    indices: frozenset[int] = frozenset()


def parse_citations(text: str, n_sentences: int) -> ParseResult:
    """Extract cited sentence indices from an oracle response.

    Accepts [i], adjacent [i][j], and comma lists [i, j]. Out-of-range
    indices are dropped. When no valid citation survives, the response is
    "no_answer" if the phrase appears anywhere (case-insensitive), otherwise
    "unparseable"."""
    if n_sentences < 1:
        raise ValueError("n_sentences must be >= 1")
    cited: set[int] = set()
    for match in _CITATION_RE.finditer(text):
        for piece in match.group(1).split(","):
            idx = int(piece.strip())
            if idx == 0:
                idx = 1  # title slot
            if 1 <= idx <= n_sentences:
                cited.add(idx)
    if cited:
        return ParseResult(kind="cited", indices=frozenset(cited))
    if _NO_ANSWER_RE.search(text):
        return ParseResult(kind="no_answer")
    return ParseResult(kind="unparseable")


# ---------------------------------------------------------------------------
# Labeled examples
# ---------------------------------------------------------------------------

@dataclass
class LabeledExample:
    """One training datapoint: per-sentence binary labels (slot 0 = title)
    plus the bounded teacher score for rank distillation."""

    query_id: str
    query: str
    passage: Passage
    labels: list[bool]
    teacher_score: float
    oracle_raw: str = ""

    def __post_init__(self) -> None:
        if len(self.labels) != 1 + len(self.passage.sentences):
            raise ValueError("labels must cover the title slot plus every body sentence")
        if not (0.0 <= self.teacher_score <= 1.0):
            raise ValueError("teacher_score must lie in [0, 1]")


def label_example(
    query_id: str,
    question: str,
    passage: Passage,
    response_text: str,
    teacher_score: float,
) -> LabeledExample | None:
    """Turn an oracle response into a LabeledExample.

    Cited indices become true labels (1-based prompt slot i maps to label
    index i-1). A "No answer" response keeps the example with all-false
    labels. Unparseable responses are filtered (returns None)."""
    n = 1 + len(passage.sentences)
    parsed = parse_citations(response_text, n)
    if parsed.kind == "unparseable":
        return None
    labels = [False] * n
    for idx in parsed.indices:
        labels[idx - 1] = True
    return LabeledExample(
        query_id=query_id,
        query=question,
        passage=passage,
        labels=labels,
        teacher_score=teacher_score,
        oracle_raw=response_text,
    )


def dataset_stats(
    examples: Sequence[LabeledExample],
    total_calls: int | None = None,
) -> dict:
    """Label statistics: histogram of selected-sentence counts per example,
    histogram of selected slot positions (0 = title), and the fraction of
    responses that carried at least one valid citation. `total_calls` lets
    the caller include filtered responses in the citation-rate denominator."""
    count_histogram: dict[int, int] = {}
    position_histogram: dict[int, int] = {}
    n_cited = 0
    for ex in examples:
        n_true = sum(ex.labels)
        count_histogram[n_true] = count_histogram.get(n_true, 0) + 1
        for pos, flag in enumerate(ex.labels):
            if flag:
                position_histogram[pos] = position_histogram.get(pos, 0) + 1
        if parse_citations(ex.oracle_raw, len(ex.labels)).kind == "cited":
            n_cited += 1
    denom = total_calls if total_calls is not None else len(examples)
    return {
        "count_histogram": dict(sorted(count_histogram.items())),
        "position_histogram": dict(sorted(position_histogram.items())),
        "citation_rate": (n_cited / denom) if denom else 0.0,
    }


# ---------------------------------------------------------------------------
# Oracle transports
# ---------------------------------------------------------------------------

class Oracle(Protocol):
    def respond(self, query_id: str, question: str, passage: Passage,
                variant: PromptVariant) -> str: ...


class HttpOracle:
    """Chat-completion-style JSON endpoint: POST {model, messages,
    temperature: 0} and read {"text": ...} back. Greedy decoding is requested
    via temperature 0."""

    def __init__(self, url: str | None = None, api_key: str | None = None,
                 model: str = "labeling-oracle", timeout: float = 60.0):
        self.url = url or os.environ.get(ORACLE_URL_ENV)
        if not self.url:
            raise ValueError(f"no oracle URL given and {ORACLE_URL_ENV} is unset")
        self.api_key = api_key if api_key is not None else os.environ.get(ORACLE_KEY_ENV)
        self.model = model
        self.timeout = timeout

    def respond(self, query_id: str, question: str, passage: Passage,
                variant: PromptVariant = "answer") -> str:
        import requests

        prompt = build_prompt(question, passage, variant)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        resp = requests.post(self.url, json=payload, headers=headers, timeout=self.timeout)
        resp.raise_for_status()
        body = resp.json()
        if "text" not in body:
            raise ValueError("oracle response lacks a 'text' field")
        return str(body["text"])


def _mix64(text: str) -> int:
    # FNV-1a, then one LCG step; enough to decorrelate adjacent keys.
    h = 14695981039346656037
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 1099511628211) & ((1 << 64) - 1)
    return (h * 6364136223846793005 + 1442695040888963407) & ((1 << 64) - 1)


class MockOracle:
    """Scripted stand-in for the labeling LLM, driven by a rules dict.

    Modes:
      keyword  - cite every sentence (title included) containing all question
                 tokens; otherwise answer "No answer".
      rate     - cite a pseudo-random sentence with probability `cite_rate`
                 (keyed on query/passage ids and `seed`), else "No answer".
      canned   - look up "<query_id>||<passage_id>" in `responses`, falling
                 back to `default`.
    """

    def __init__(self, rules: dict):
        mode = rules.get("mode", "keyword")
        if mode not in ("keyword", "rate", "canned"):
            raise ValueError(f"unknown mock oracle mode {mode!r}")
        self.mode = mode
        self.cite_rate = float(rules.get("cite_rate", 0.9))
        self.seed = int(rules.get("seed", 0))
        self.responses: dict[str, str] = dict(rules.get("responses", {}))
        self.default = str(rules.get("default", "No answer"))

    @classmethod
    def from_file(cls, path: str | Path) -> "MockOracle":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def respond(self, query_id: str, question: str, passage: Passage,
                variant: PromptVariant = "answer") -> str:
        if self.mode == "canned":
            return self.responses.get(f"{query_id}||{passage.id}", self.default)
        if self.mode == "rate":
            state = _mix64(f"{query_id}||{passage.id}||{self.seed}")
            u = (state >> 11) / float(1 << 53)
            n = 1 + len(passage.sentences)
            if u < self.cite_rate:
                idx = 1 + (state % n)
                return f"The context provides the answer [{idx}]."
            return "No answer"
        needed = set(tokenize(question))
        cites = [
            i
            for i, sentence in enumerate([passage.title] + passage.sentences, start=1)
            if needed and needed.issubset(tokenize(sentence))
        ]
        if not cites:
            return "No answer"
        marks = "".join(f"[{i}]" for i in cites)
        return f"The context answers the question {marks}."


# ---------------------------------------------------------------------------
# Batch labeling
# ---------------------------------------------------------------------------

@dataclass
class LabelingTask:
    query_id: str
    question: str
    passage: Passage
    teacher_score: float


@dataclass
class LabelingOutcome:
    task: LabelingTask
    raw: str
    parse_kind: ParseKind
    example: LabeledExample | None


def run_labeling(
    tasks: Sequence[LabelingTask],
    oracle: Oracle,
    variant: PromptVariant = "answer",
    jobs: int = 1,
) -> list[LabelingOutcome]:
    """Query the oracle for every task and apply parsing plus filtering.

    Oracle calls may run with bounded parallelism; outcomes are returned in
    input order regardless of completion order."""

    def one(task: LabelingTask) -> LabelingOutcome:
        raw = oracle.respond(task.query_id, task.question, task.passage, variant)
        parsed = parse_citations(raw, 1 + len(task.passage.sentences))
        example = label_example(task.query_id, task.question, task.passage,
                                raw, task.teacher_score)
        return LabelingOutcome(task=task, raw=raw, parse_kind=parsed.kind, example=example)

    if jobs <= 1:
        return [one(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, tasks))


def write_labeled(path: str | Path, examples: Iterable[LabeledExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "query_id": ex.query_id,
                "query": ex.query,
                "passage_id": ex.passage.id,
                "title": ex.passage.title,
                "sentences": ex.passage.sentences,
                "labels": [1 if flag else 0 for flag in ex.labels],
                "teacher_score": ex.teacher_score,
                "oracle_raw": ex.oracle_raw,
            }, ensure_ascii=False) + "\n")


def read_labeled(path: str | Path) -> list[LabeledExample]:
    out = []
    for lineno, obj in _iter_jsonl(path):
        passage = Passage(
            id=str(obj["passage_id"]),
            doc_id=str(obj.get("doc_id", obj["passage_id"])),
            title=str(obj["title"]),
            sentences=[str(s) for s in obj["sentences"]],
        )
        out.append(LabeledExample(
            query_id=str(obj["query_id"]),
            query=str(obj["query"]),
            passage=passage,
            labels=[bool(v) for v in obj["labels"]],
            teacher_score=float(obj["teacher_score"]),
            oracle_raw=str(obj.get("oracle_raw", "")),
        ))
    return out
