"""Command-line entry point wiring the full pipeline.

Subcommands: synth, chunk, index, retrieve, label, train, prune,
rerank-prune, stats, eval {needle,heatmap,sweep,granularity,ranking,bench}.

Exit codes: 0 on success, 1 on usage errors, 2 on data or validation errors.
All randomness flows from --seed, fanned out per stage by hashing the stage
name into the seed, so identical inputs plus identical seeds reproduce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import (
    Document,
    JsonlError,
    Passage,
    chunk_fixed,
    chunk_random,
    chunk_words,
    fnv1a64,
    read_documents,
    read_passages,
    write_passages,
)
from .evaluation import (
    GRANULARITY_RECIPES,
    SyntheticSpec,
    count_heatmap,
    format_table,
    granularity_eval,
    heatmap_to_csv,
    make_heatmap_cases,
    make_hosts,
    make_needles,
    make_sweep_cases,
    make_synthetic,
    needle_eval,
    ranking_eval,
    threshold_sweep,
    timing_bench,
    to_train_items,
    whole_doc_passage,
    write_json_report,
)
from .inference import Pruner, write_prune_results
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.training import TrainingDiverged, train
from .oracle import (
    HttpOracle,
    LabelingTask,
    MockOracle,
    dataset_stats,
    read_labeled,
    run_labeling,
    write_labeled,
)
from .retrieval import LexicalIndex, build_index, retrieve
from .runconfig import ConfigError, RunConfig
from .segmentation import EncodingError, Vocab, build_vocab
from .retrieval import normalize_pool, score_all, ScoredPassage

_MASK63 = (1 << 63) - 1


def stage_seed(seed: int, stage: str) -> int:
    """Deterministic per-stage fan-out of the single --seed flag."""
    return (fnv1a64(stage) ^ (seed & _MASK63)) & _MASK63


def _load_pruner(model_path: str, vocab_path: str) -> Pruner:
    if not Path(model_path).exists():
        raise FileNotFoundError(f"checkpoint not found: {model_path}")
    if not Path(vocab_path).exists():
        raise FileNotFoundError(f"vocab file not found: {vocab_path}")
    params, cfg = load_checkpoint(model_path)
    vocab = Vocab.load(vocab_path)
    return Pruner(params, cfg, vocab)


def _read_queries(path: str) -> list[dict]:
    from .corpus import _iter_jsonl

    rows = []
    for lineno, obj in _iter_jsonl(path):
        if "text" not in obj:
            raise JsonlError(f"{path}:{lineno}: query rows need a 'text' field")
        rows.append({"query_id": str(obj.get("query_id", f"q{lineno}")),
                     "text": str(obj["text"])})
    return rows


# ---------------------------------------------------------------------------
# synth / chunk / index / retrieve
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    spec = config.synthetic_spec(seed=stage_seed(args.seed, "synth"))
    synth = make_synthetic(spec)
    with open(args.output_docs, "w", encoding="utf-8") as fh:
        for doc in synth.documents:
            fh.write(json.dumps({"id": doc.id, "title": doc.title, "text": doc.text},
                                ensure_ascii=False) + "\n")
    with open(args.output_queries, "w", encoding="utf-8") as fh:
        for q in synth.queries:
            fh.write(json.dumps({"query_id": q.query_id, "text": q.text,
                                 "keywords": list(q.keywords), "answer": q.answer,
                                 "doc_id": q.doc_id}, ensure_ascii=False) + "\n")
    if args.output_gold:
        with open(args.output_gold, "w", encoding="utf-8") as fh:
            for q in synth.queries:
                labels = [1 if flag else 0 for flag in synth.gold_labels[q.query_id]]
                fh.write(json.dumps({"query_id": q.query_id, "labels": labels}) + "\n")
    print(f"wrote {len(synth.documents)} documents and {len(synth.queries)} queries")
    return 0


def _parse_strategy(spec: str):
    parts = spec.split(":")
    if parts[0] == "random" and len(parts) == 1:
        return ("random",)
    if parts[0] == "fixed" and len(parts) == 3:
        return ("fixed", int(parts[1]), int(parts[2]))
    if parts[0] == "words" and len(parts) == 2:
        return ("words", int(parts[1]))
    raise ValueError(
        f"bad --strategy {spec!r}; expected random, fixed:N:OVERLAP, or words:BUDGET")


def cmd_chunk(args: argparse.Namespace) -> int:
    strategy = _parse_strategy(args.strategy)
    docs = read_documents(args.input)
    seed = stage_seed(args.seed, "chunk")
    passages: list[Passage] = []
    for doc in docs:
        if strategy[0] == "random":
            passages.extend(chunk_random(doc, seed))
        elif strategy[0] == "fixed":
            passages.extend(chunk_fixed(doc, strategy[1], strategy[2]))
        else:
            passages.extend(chunk_words(doc, strategy[1]))
    write_passages(args.output, passages)
    print(f"wrote {len(passages)} passages from {len(docs)} documents")
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    passages = read_passages(args.passages)
    index = build_index(passages)
    index.save(args.output)
    print(f"indexed {index.n_docs} passages, {len(index.postings)} terms")
    return 0


def cmd_retrieve(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    k = args.k if args.k is not None else config["retrieval"]["k"]
    index = LexicalIndex.load(args.index)
    queries = _read_queries(args.queries)
    with open(args.output, "w", encoding="utf-8") as fh:
        for q in queries:
            for rank, sp in enumerate(retrieve(index, q["text"], k), start=1):
                fh.write(json.dumps({
                    "query_id": q["query_id"], "rank": rank,
                    "passage_id": sp.passage_id, "raw_score": sp.raw_score,
                    "teacher_score": sp.teacher_score}, ensure_ascii=False) + "\n")
    print(f"retrieved top-{k} for {len(queries)} queries")
    return 0


# ---------------------------------------------------------------------------
# label / stats
# ---------------------------------------------------------------------------

def _make_oracle(args: argparse.Namespace, config: RunConfig):
    if getattr(args, "oracle_mock", None):
        return MockOracle.from_file(args.oracle_mock)
    section = config["oracle"]
    url = getattr(args, "oracle_url", None) or section["url"]
    return HttpOracle(url=url, model=section["model"], timeout=section["timeout"])


def cmd_label(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    variant = args.variant or config["oracle"]["variant"]
    k = args.k if args.k is not None else config["retrieval"]["k"]
    passages = read_passages(args.passages)
    by_id = {p.id: p for p in passages}
    index = LexicalIndex.load(args.index) if args.index else build_index(passages)
    queries = _read_queries(args.queries)
    oracle = _make_oracle(args, config)

    tasks = []
    for q in queries:
        scores = score_all(index, q["text"])
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        pool = [ScoredPassage(passage_id=pid, raw_score=s, teacher_score=0.0)
                for pid, s in ranked]
        normalize_pool(pool)
        for sp in pool:
            tasks.append(LabelingTask(query_id=q["query_id"], question=q["text"],
                                      passage=by_id[sp.passage_id],
                                      teacher_score=sp.teacher_score))
    outcomes = run_labeling(tasks, oracle, variant=variant, jobs=args.jobs)
    examples = [o.example for o in outcomes if o.example is not None]
    write_labeled(args.output, examples)
    n_filtered = len(outcomes) - len(examples)
    if args.stats_out:
        stats = dataset_stats(examples, total_calls=len(outcomes))
        stats["n_examples"] = len(examples)
        stats["n_filtered"] = n_filtered
        write_json_report(args.stats_out, stats)
    print(f"labeled {len(examples)} examples ({n_filtered} filtered) from {len(tasks)} calls")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    examples = read_labeled(args.data)
    stats = dataset_stats(examples)
    stats["n_examples"] = len(examples)
    if args.output:
        write_json_report(args.output, stats)
    print(json.dumps(stats, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    examples = read_labeled(args.data)
    if not examples:
        raise ValueError(f"{args.data}: no training examples")
    corpus_texts = [ex.passage.text for ex in examples] + [ex.query for ex in examples]
    vocab = build_vocab(corpus_texts, min_freq=config["segmentation"]["min_freq"])
    model_cfg = config.model_config(vocab_size=len(vocab))
    train_cfg = config.train_config(seed=args.seed if args.seed is not None else None)
    items = to_train_items(examples, vocab, model_cfg)
    try:
        params, log = train(train_cfg, model_cfg, items)
    except TrainingDiverged as exc:
        raise ValueError(str(exc)) from exc
    save_checkpoint(args.output, params, model_cfg)
    vocab.save(args.vocab_out)
    if args.log_out:
        with open(args.log_out, "w", encoding="utf-8") as fh:
            for step in log.steps:
                fh.write(json.dumps({"step": step.step, "label_loss": step.label_loss,
                                     "rank_loss": step.rank_loss,
                                     "total_loss": step.total_loss}) + "\n")
    last = log.steps[-1] if log.steps else None
    tail = f", final loss {last.total_loss:.4f}" if last else ""
    print(f"trained on {len(items)} examples for {train_cfg.epochs} epochs{tail}")
    return 0


# ---------------------------------------------------------------------------
# prune / rerank-prune
# ---------------------------------------------------------------------------

def _inline_passage(obj: dict, lineno: int, path: str) -> Passage:
    from .segmentation import split_sentences

    data = obj["passage"]
    if not isinstance(data, dict):
        raise JsonlError(f"{path}:{lineno}: 'passage' must be an object")
    pid = str(data.get("id", f"inline-{lineno}"))
    title = str(data.get("title", ""))
    if "sentences" in data:
        sentences = [str(s) for s in data["sentences"]]
    elif "text" in data:
        sentences = split_sentences(str(data["text"]))
    else:
        raise JsonlError(f"{path}:{lineno}: inline passage needs 'sentences' or 'text'")
    return Passage(id=pid, doc_id=str(data.get("doc_id", pid)), title=title,
                   sentences=sentences)


def cmd_prune(args: argparse.Namespace) -> int:
    from .corpus import _iter_jsonl

    config = RunConfig.load(args.config)
    threshold = args.threshold if args.threshold is not None else config["inference"]["threshold"]
    enforce_title = not args.no_enforce_title and config["inference"]["enforce_title"]
    pruner = _load_pruner(args.model, args.vocab)
    lookup = {}
    if args.passages:
        lookup = {p.id: p for p in read_passages(args.passages)}
    rows = []
    for lineno, obj in _iter_jsonl(args.input):
        if "query" not in obj:
            raise JsonlError(f"{args.input}:{lineno}: missing 'query'")
        query = str(obj["query"])
        if "passage" in obj:
            passage = _inline_passage(obj, lineno, args.input)
        elif "passage_id" in obj:
            pid = str(obj["passage_id"])
            if pid not in lookup:
                raise JsonlError(
                    f"{args.input}:{lineno}: passage id {pid!r} not found "
                    f"(did you pass --passages?)")
            passage = lookup[pid]
        else:
            raise JsonlError(f"{args.input}:{lineno}: need 'passage' or 'passage_id'")
        rows.append((query, pruner.prune(query, passage, threshold, enforce_title)))
    write_prune_results(args.output, rows)
    print(f"pruned {len(rows)} pairs at threshold {threshold}")
    return 0


def cmd_rerank_prune(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    threshold = args.threshold if args.threshold is not None else config["inference"]["threshold"]
    pruner = _load_pruner(args.model, args.vocab)
    passages = read_passages(args.passages)
    by_id = {p.id: p for p in passages}
    index = LexicalIndex.load(args.index) if args.index else build_index(passages)
    queries = _read_queries(args.queries)
    with open(args.output, "w", encoding="utf-8") as fh:
        for q in queries:
            pool = retrieve(index, q["text"], args.candidates)
            candidates = [by_id[sp.passage_id] for sp in pool]
            if not candidates:
                continue
            results = pruner.rerank_and_prune(q["text"], candidates, threshold, args.k)
            for rank, result in enumerate(results, start=1):
                record = {"query_id": q["query_id"], "query": q["text"], "rank": rank}
                record.update(result.to_json())
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"reranked and pruned top-{args.k} for {len(queries)} queries")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _eval_synth(args: argparse.Namespace, config: RunConfig,
                override: dict | None = None) -> tuple[SyntheticSpec, object]:
    seed = stage_seed(args.seed, "eval-synth")
    spec = config.synthetic_spec(seed=seed)
    if override:
        from dataclasses import replace

        spec = replace(spec, **override)
    return spec, make_synthetic(spec)


def cmd_eval_needle(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    pruner = _load_pruner(args.model, args.vocab)
    threshold = args.threshold if args.threshold is not None else config["inference"]["threshold"]
    ev = config["evaluation"]
    _, synth = _eval_synth(args, config)
    needles = make_needles(synth, n=ev["needles_per_len"], lengths=(1, 2),
                           seed=stage_seed(args.seed, "needles"))
    hosts = make_hosts(synth, n_hosts=ev["needle_hosts"], body_len=ev["needle_host_len"],
                       seed=stage_seed(args.seed, "hosts"))
    reports = needle_eval(pruner, needles, hosts, None, threshold)
    payload = {}
    for length, report in reports.items():
        payload[str(length)] = {
            "threshold": report.threshold,
            "retention": {str(k): v for k, v in report.retention.items()},
            "mean_kept": {str(k): v for k, v in report.mean_kept.items()},
            "interior_retention": report.interior_retention(),
        }
        rows = [(p, f"{report.retention[p]:.3f}", f"{report.mean_kept[p]:.2f}")
                for p in sorted(report.retention)]
        print(f"needle length {length} (T={threshold}):")
        print(format_table(["position", "retention", "mean_kept"], rows))
    if args.output:
        write_json_report(args.output, payload)
    return 0


def cmd_eval_heatmap(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    pruner = _load_pruner(args.model, args.vocab)
    threshold = args.threshold if args.threshold is not None else config["inference"]["threshold"]
    _, synth = _eval_synth(args, config)
    cases = make_heatmap_cases(synth)
    heatmap = count_heatmap(pruner, cases, threshold)
    band = heatmap.mass_within(1, rows=[0, 1, 2, 3])
    rows = [[g] + [f"{heatmap.matrix[gi][ci]:.1f}" for ci in range(len(heatmap.col_labels))]
            for gi, g in enumerate(heatmap.row_labels)]
    print(format_table(["gold\\pred"] + [str(c) for c in heatmap.col_labels], rows))
    print("row mass within |gold-pred|<=1:",
          {k: f"{v:.1f}%" for k, v in band.items()})
    if args.output:
        heatmap_to_csv(args.output, heatmap)
    if args.json_out:
        write_json_report(args.json_out, {
            "rows": heatmap.row_labels, "cols": heatmap.col_labels,
            "matrix": [list(map(float, r)) for r in heatmap.matrix],
            "row_counts": heatmap.row_counts,
            "band_mass": band,
        })
    return 0


def cmd_eval_sweep(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    pruner = _load_pruner(args.model, args.vocab)
    thresholds = [float(t) for t in args.thresholds.split(",")]
    _, synth = _eval_synth(args, config)
    cases = make_sweep_cases(synth)
    points = threshold_sweep(pruner, cases, thresholds)
    rows = [(f"{p.threshold:.2f}", f"{p.mean_compression:.3f}", f"{p.answer_retention:.3f}")
            for p in points]
    print(format_table(["threshold", "compression", "retention"], rows))
    if args.output:
        write_json_report(args.output, {"points": [
            {"threshold": p.threshold, "mean_compression": p.mean_compression,
             "answer_retention": p.answer_retention} for p in points]})
    return 0


def cmd_eval_granularity(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    pruner = _load_pruner(args.model, args.vocab)
    threshold = args.threshold if args.threshold is not None else config["inference"]["threshold"]
    _, synth = _eval_synth(args, config, override={"sentences_per_doc": (12, 16)})
    reports = granularity_eval(pruner, synth, threshold)
    rows = [(name, f"{r.mean_compression:.3f}", f"{r.answer_retention:.3f}",
             f"{r.baseline_retention:.3f}", r.n_queries)
            for name, r in reports.items()]
    print(format_table(["recipe", "compression", "retention", "baseline", "n"], rows))
    if args.output:
        write_json_report(args.output, {name: {
            "mean_compression": r.mean_compression,
            "answer_retention": r.answer_retention,
            "baseline_retention": r.baseline_retention,
            "n_queries": r.n_queries} for name, r in reports.items()})
    return 0


def cmd_eval_ranking(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    pruner = _load_pruner(args.model, args.vocab)
    _, synth = _eval_synth(args, config)
    passages = [whole_doc_passage(doc) for doc in synth.documents]
    index = build_index(passages)
    by_id = {p.id: p for p in passages}
    report = ranking_eval(synth, index, by_id,
                          scorer=lambda q, p, teacher: pruner.rank(q, p), k=args.k)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.output:
        write_json_report(args.output, report)
    return 0


def cmd_eval_bench(args: argparse.Namespace) -> int:
    config = RunConfig.load(args.config)
    pruner = _load_pruner(args.model, args.vocab)
    threshold = args.threshold if args.threshold is not None else config["inference"]["threshold"]
    _, synth = _eval_synth(args, config)
    cases = make_sweep_cases(synth)[:args.n]
    report = timing_bench(pruner, cases, threshold)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.output:
        write_json_report(args.output, report)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None, help="JSON run config (defaults apply)")
    sub.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sub.add_argument("--jobs", type=int, default=1,
                     help="bounded parallelism where supported (default 1, serial)")


def _add_model_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", required=True, help="checkpoint path")
    sub.add_argument("--vocab", required=True, help="vocab JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prunerank",
        description="Context pruning and reranking pipeline: chunk, retrieve, "
                    "label, train, prune, evaluate.")
    parser.add_argument("--version", action="version", version=f"prunerank {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate the synthetic evaluation corpus")
    _add_common(p)
    p.add_argument("--output-docs", required=True)
    p.add_argument("--output-queries", required=True)
    p.add_argument("--output-gold", default=None)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("chunk", help="chunk documents into titled passages")
    _add_common(p)
    p.add_argument("--input", required=True, help="documents JSONL: {id,title,text}")
    p.add_argument("--output", required=True, help="passages JSONL out")
    p.add_argument("--strategy", default="random",
                   help="random | fixed:N:OVERLAP | words:BUDGET (default random)")
    p.set_defaults(func=cmd_chunk)

    p = subs.add_parser("index", help="build the BM25 index over passages")
    _add_common(p)
    p.add_argument("--passages", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_index)

    p = subs.add_parser("retrieve", help="top-k retrieval with teacher scores")
    _add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="JSONL: {query_id,text}")
    p.add_argument("--k", type=int, default=None, help="pool size (default from config)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = subs.add_parser("label", help="generate silver labels via the oracle")
    _add_common(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--passages", required=True)
    p.add_argument("--index", default=None, help="prebuilt index (else built in memory)")
    p.add_argument("--k", type=int, default=None, help="passages labeled per query")
    p.add_argument("--variant", choices=["answer", "relevance", "straightforward"],
                   default=None, help="prompt variant (default from config)")
    p.add_argument("--oracle-mock", default=None, help="mock oracle rules JSON file")
    p.add_argument("--oracle-url", default=None,
                   help="HTTP oracle endpoint (default: PROVENCE_ORACLE_URL)")
    p.add_argument("--output", required=True)
    p.add_argument("--stats-out", default=None, help="write label statistics JSON")
    p.set_defaults(func=cmd_label)

    p = subs.add_parser("train", help="train the pruning+reranking encoder")
    _add_common(p)
    p.add_argument("--data", required=True, help="labeled examples JSONL")
    p.add_argument("--output", required=True, help="checkpoint out")
    p.add_argument("--vocab-out", required=True, help="vocab JSON out")
    p.add_argument("--log-out", default=None, help="per-step loss log JSONL")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("prune", help="prune (query, passage) pairs")
    _add_common(p)
    _add_model_args(p)
    p.add_argument("--input", required=True,
                   help="JSONL: {query, passage_id} or {query, passage:{...}}")
    p.add_argument("--passages", default=None, help="passage lookup for passage_id rows")
    p.add_argument("--threshold", type=float, default=None,
                   help="keep threshold T (default 0.1; 0.5 for stronger pruning)")
    p.add_argument("--no-enforce-title", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_prune)

    p = subs.add_parser("rerank-prune", help="rerank candidates and prune the top k")
    _add_common(p)
    _add_model_args(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--passages", required=True)
    p.add_argument("--index", default=None)
    p.add_argument("--candidates", type=int, default=20,
                   help="BM25 prefilter size fed to the model (default 20)")
    p.add_argument("--k", type=int, default=5, help="results kept per query")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_rerank_prune)

    p = subs.add_parser("stats", help="dataset statistics over labeled examples")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_stats)

    p = subs.add_parser("eval", help="desk-scale evaluations on synthetic data")
    esubs = p.add_subparsers(dest="eval_kind", required=True)

    e = esubs.add_parser("needle", help="needle-in-the-haystack position sweep")
    _add_common(e)
    _add_model_args(e)
    e.add_argument("--threshold", type=float, default=None)
    e.add_argument("--output", default=None)
    e.set_defaults(func=cmd_eval_needle)

    e = esubs.add_parser("heatmap", help="gold vs predicted sentence-count heatmap")
    _add_common(e)
    _add_model_args(e)
    e.add_argument("--threshold", type=float, default=None)
    e.add_argument("--output", default=None, help="CSV matrix out")
    e.add_argument("--json-out", default=None)
    e.set_defaults(func=cmd_eval_heatmap)

    e = esubs.add_parser("sweep", help="threshold sweep: compression vs retention")
    _add_common(e)
    _add_model_args(e)
    e.add_argument("--thresholds", default="0,0.1,0.5,0.9")
    e.add_argument("--output", default=None)
    e.set_defaults(func=cmd_eval_sweep)

    e = esubs.add_parser("granularity", help="robustness across chunking recipes")
    _add_common(e)
    _add_model_args(e)
    e.add_argument("--threshold", type=float, default=None)
    e.add_argument("--output", default=None)
    e.set_defaults(func=cmd_eval_granularity)

    e = esubs.add_parser("ranking", help="MRR@10 and Kendall tau vs the teacher")
    _add_common(e)
    _add_model_args(e)
    e.add_argument("--k", type=int, default=10)
    e.add_argument("--output", default=None)
    e.set_defaults(func=cmd_eval_ranking)

    e = esubs.add_parser("bench", help="wall-clock prune latency")
    _add_common(e)
    _add_model_args(e)
    e.add_argument("--threshold", type=float, default=None)
    e.add_argument("--n", type=int, default=50)
    e.add_argument("--output", default=None)
    e.set_defaults(func=cmd_eval_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
        return 0 if code == 0 else 1
    try:
        return args.func(args)
    except (JsonlError, ConfigError, EncodingError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
