"""Command-line pipeline: index -> mine -> train-planner -> plan -> retrieve -> answer -> eval.

Every stage reads and writes files; a JSON summary goes to stdout, logs to
stderr.  Exit codes: 0 ok, 2 usage, 3 missing input or conflicting
configuration, 4 malformed data, 5 generation service failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import multiprocessing
import os
import random
import statistics
import sys
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import __version__
from .datasets import BuildReport, build_planning_dataset, build_reasoning_dataset, mine_example, write_records
from .evaluation import evaluate_run
from .graph import GraphLookupError, KnowledgeGraph, TripleParseError, load_graph_file, write_triples
from .llm import GenerationError, HttpGenerationClient
from .mining import DEFAULT_MAX_HOPS
from .paths import PlanParseError, parse_plan, parse_reasoning_path, serialize_plan, serialize_reasoning_path
from .planning import DEFAULT_ALPHA, DEFAULT_K, DEFAULT_MAX_LEN, BeamConfig, CountPlanner, fit_count_planner, generate_plans, llm_generate_plans
from .qa import QAExample, QAFormatError, load_qa, resolve, write_qa
from .reasoning import DEFAULT_VOTE_N, answers_all, answers_vote, llm_reason
from .retrieval import RetrievalResult, retrieve_paths
from . import synthetic

logger = logging.getLogger("kgreason")

DEFAULT_CAP = 3000

EXIT_MISSING = 3
EXIT_DATA = 4
EXIT_GENERATION = 5


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_MISSING):
        super().__init__(message)
        self.code = code


# --- io helpers -------------------------------------------------------------

def _need(path: Optional[str], what: str) -> Path:
    if not path:
        raise CliError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} file not found: {p}")
    return p


def load_any_graph(path: str) -> KnowledgeGraph:
    p = _need(path, "graph")
    if p.suffix == ".npz":
        return KnowledgeGraph.load(p)
    return load_graph_file(p)


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def write_jsonl(rows: Sequence[dict], path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def _by_id(rows: list[dict], what: str) -> dict[str, dict]:
    out = {}
    for row in rows:
        if "id" not in row:
            raise CliError(f"{what} record without id", EXIT_DATA)
        out[row["id"]] = row
    return out


# --- parallel map -----------------------------------------------------------
# Workers are forked after _STATE is filled, so the graph is shared copy-on-write.

_STATE: dict = {}


def parallel_map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) < 2 or "fork" not in multiprocessing.get_all_start_methods():
        return [fn(x) for x in items]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(min(jobs, len(items))) as pool:
        return pool.map(fn, items, chunksize=max(1, len(items) // (jobs * 4)))


# --- commands ---------------------------------------------------------------

def cmd_synth(args) -> dict:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    triples = out / "triples.tsv"
    if args.kind == "example2":
        g, ex = synthetic.example2()
        write_triples(g, triples)
        write_qa([ex], out / "qa.jsonl")
        return {"triples": str(triples), "qa": str(out / "qa.jsonl"), **g.stats()}
    if args.kind == "zipf":
        n = 0
        with open(triples, "w", encoding="utf-8") as f:
            for s, r, o in synthetic.zipf_triples(args.triples, args.entities, args.relations,
                                                  seed=args.seed):
                f.write(f"{s}\t{r}\t{o}\n")
                n += 1
        return {"triples": str(triples), "written": n}
    task = synthetic.make_template_task(seed=args.seed, n_train=args.train, n_test=args.test)
    write_triples(task.graph, triples)
    write_qa(task.train, out / "train.jsonl")
    write_qa(task.test, out / "test.jsonl")
    return {"triples": str(triples), "train": len(task.train), "test": len(task.test),
            **task.graph.stats()}


def cmd_index(args) -> dict:
    src = _need(args.triples, "triples")
    t0 = time.perf_counter()
    g = load_graph_file(src, add_inverse=args.add_inverse)
    build_s = time.perf_counter() - t0
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    g.save(args.out)
    logger.info("indexed %s in %.2fs -> %s", src, build_s, args.out)
    return {"snapshot": args.out, **g.stats()}


def _mine_one(ex: QAExample) -> tuple[Optional[dict], dict]:
    g: KnowledgeGraph = _STATE["graph"]
    report = BuildReport()
    mined, _ = mine_example(ex, g, _STATE["max_hops"], report)
    if mined is None:
        return None, report.skipped
    return {"id": ex.id, "question": ex.question, "hop_count": mined.hop_count,
            "weight": mined.posterior_weight,
            "plans": [serialize_plan(z, g.vocab) for z in mined.plans]}, {}


def cmd_mine(args) -> dict:
    g = load_any_graph(args.graph)
    examples = load_qa(_need(args.qa, "qa"))
    _STATE.update(graph=g, max_hops=args.max_hops)
    results = parallel_map(_mine_one, examples, args.jobs)
    rows = [r for r, _ in results if r is not None]
    skipped: dict[str, int] = {}
    for _, sk in results:
        for k, v in sk.items():
            skipped[k] = skipped.get(k, 0) + v
    write_jsonl(rows, args.out)
    return {"examples": len(examples), "mined": len(rows),
            "plans": sum(len(r["plans"]) for r in rows), "skipped": skipped, "out": args.out}


def cmd_build_dataset(args) -> dict:
    g = load_any_graph(args.graph)
    examples = load_qa(_need(args.qa, "qa"))
    records, summary = [], {}
    if args.kind in ("planning", "both"):
        rep = BuildReport()
        records += build_planning_dataset(examples, g, args.max_hops, rep)
        summary["planning"] = {"records": rep.records, "skipped": rep.skipped}
    if args.kind in ("reasoning", "both"):
        rep = BuildReport()
        records += build_reasoning_dataset(examples, g, args.max_hops, args.cap, rep)
        summary["reasoning"] = {"records": rep.records, "skipped": rep.skipped}
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_records(records, args.out)
    return {**summary, "out": args.out}


def cmd_train_planner(args) -> dict:
    g = load_any_graph(args.graph)
    rows = read_jsonl(_need(args.mined, "mined"))
    pairs = []
    for row in rows:
        for text in row["plans"]:
            pairs.append((row["question"], parse_plan(text, g.vocab)))
    model = fit_count_planner(pairs, g.vocab, alpha=args.alpha, max_len=args.max_len)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    model.save(args.out)
    return {"pairs": len(pairs), "questions": len(rows), "out": args.out}


def _llm_client(args) -> HttpGenerationClient:
    endpoint = args.llm_endpoint or os.environ.get("KGREASON_LLM_ENDPOINT")
    if not endpoint:
        raise CliError("llm mode needs --llm-endpoint or KGREASON_LLM_ENDPOINT")
    return HttpGenerationClient(endpoint, os.environ.get("KGREASON_LLM_TOKEN"),
                                timeout=float(os.environ.get("KGREASON_LLM_TIMEOUT", "60")),
                                max_in_flight=args.max_in_flight)


def _plan_one(ex: QAExample) -> dict:
    g: KnowledgeGraph = _STATE["graph"]
    model = _STATE["planner"]
    plans = generate_plans(model, ex.question, _STATE["beam"])
    return {"id": ex.id, "plans": [{"plan": serialize_plan(z, g.vocab), "logprob": lp}
                                   for z, lp in plans]}


def cmd_plan(args) -> dict:
    g = load_any_graph(args.graph)
    examples = load_qa(_need(args.qa, "qa"))
    if args.planner_mode == "llm":
        client = _llm_client(args)
        rows = []
        for ex in examples:
            plans = llm_generate_plans(client, ex.question, g.vocab, k=args.k)
            rows.append({"id": ex.id, "plans": [{"plan": serialize_plan(z, g.vocab), "logprob": None}
                                                for z in plans]})
    else:
        model = CountPlanner.load(_need(args.planner, "planner"), g.vocab)
        beam = BeamConfig(beam_width=max(args.beam_width, args.k), k=args.k, max_len=args.max_len)
        _STATE.update(graph=g, planner=model, beam=beam)
        rows = parallel_map(_plan_one, examples, args.jobs)
    write_jsonl(rows, args.out)
    return {"questions": len(rows), "plans": sum(len(r["plans"]) for r in rows), "out": args.out}


def _retrieve_one(item: tuple[QAExample, list[str]]) -> tuple[dict, float]:
    ex, plan_texts = item
    g: KnowledgeGraph = _STATE["graph"]
    topics, missing = resolve(g.vocab, ex.topic_entities)
    out = []
    elapsed = 0.0
    for text in plan_texts:
        z = parse_plan(text, g.vocab)
        if not topics:
            out.append({"plan": text, "paths": [], "truncated": False})
            continue
        res = retrieve_paths(g, topics, z, _STATE["cap"])
        elapsed += res.elapsed
        out.append({"plan": text, "paths": [serialize_reasoning_path(p, g.vocab) for p in res.paths],
                    "truncated": res.truncated})
    return {"id": ex.id, "results": out}, elapsed


def cmd_retrieve(args) -> dict:
    g = load_any_graph(args.graph)
    examples = load_qa(_need(args.qa, "qa"))
    plans = _by_id(read_jsonl(_need(args.plans, "plans")), "plans")
    items = [(ex, [p["plan"] for p in plans.get(ex.id, {}).get("plans", [])]) for ex in examples]
    _STATE.update(graph=g, cap=args.cap)
    results = parallel_map(_retrieve_one, items, args.jobs)
    rows = [r for r, _ in results]
    write_jsonl(rows, args.out)
    n_paths = sum(len(res["paths"]) for r in rows for res in r["results"])
    return {"questions": len(rows), "paths": n_paths,
            "elapsed_s": round(sum(e for _, e in results), 6), "out": args.out}


def _results_from_row(row: dict, g: KnowledgeGraph) -> list[RetrievalResult]:
    out = []
    for res in row.get("results", []):
        z = parse_plan(res["plan"], g.vocab)
        paths = [parse_reasoning_path(t, g.vocab) for t in res["paths"]]
        out.append(RetrievalResult(z, paths, res.get("truncated", False)))
    return out


def cmd_answer(args) -> dict:
    g = load_any_graph(args.graph)
    examples = load_qa(_need(args.qa, "qa"))
    retrieved = _by_id(read_jsonl(_need(args.retrieved, "retrieved")), "retrieved")
    client = _llm_client(args) if args.reasoner == "llm" else None
    rows = []
    for ex in examples:
        results = _results_from_row(retrieved.get(ex.id, {}), g)
        if args.reasoner == "all":
            ans = answers_all(results)
        elif args.reasoner == "vote":
            ans = answers_vote(results, args.vote_n)
        else:
            ans = llm_reason(client, ex.question, results, g.vocab)
        rows.append({"id": ex.id, "answers": ans.names(g.vocab),
                     "scores": [s for _, s in ans.answers], "source": ans.source})
    write_jsonl(rows, args.out)
    return {"questions": len(rows), "answered": sum(1 for r in rows if r["answers"]),
            "out": args.out}


def cmd_eval(args) -> dict:
    examples = load_qa(_need(args.qa, "qa"))
    preds = {r["id"]: r["answers"] for r in read_jsonl(_need(args.predictions, "predictions"))}
    hops = None
    if args.hops:
        hops = {r["id"]: r["hop_count"] for r in read_jsonl(_need(args.hops, "hops"))}
    gold = {ex.id: ex.answers for ex in examples if ex.answers}
    report = evaluate_run(preds, gold, hops)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    print(report.table(), file=sys.stderr)
    o = report.overall
    return {"questions": o.count, "hits_at_1": o.hits_at_1, "macro_f1": o.macro_f1,
            "macro_precision": o.macro_precision, "macro_recall": o.macro_recall,
            "out": args.out}


def retrieval_stats(g: KnowledgeGraph, examples: Sequence[QAExample], model, ks: Sequence[int],
                    beam_width: int, max_len: int, cap: Optional[int]) -> list[dict]:
    """Mean retrieved-path count and latency per question for each top-K.

    Plans for every K are prefixes of one decode with k = max(ks), so the
    plan list only grows with K.
    """
    kmax = max(ks)
    cfg = BeamConfig(beam_width=max(beam_width, kmax), k=kmax, max_len=max_len)
    per_q = []
    for ex in examples:
        topics, _ = resolve(g.vocab, ex.topic_entities)
        if not topics:
            continue
        plans = [z for z, _ in generate_plans(model, ex.question, cfg)]
        per_q.append([retrieve_paths(g, topics, z, cap) for z in plans])
    rows = []
    for k in sorted(ks):
        counts = [sum(len(r.paths) for r in res[:k]) for res in per_q]
        times = [sum(r.elapsed for r in res[:k]) for res in per_q]
        rows.append({"k": k, "questions": len(per_q),
                     "mean_paths": statistics.fmean(counts) if counts else 0.0,
                     "mean_ms": 1000 * statistics.fmean(times) if times else 0.0})
    return rows


def cmd_retrieval_stats(args) -> dict:
    g = load_any_graph(args.graph)
    examples = load_qa(_need(args.qa, "qa"))
    model = CountPlanner.load(_need(args.planner, "planner"), g.vocab)
    ks = [int(k) for k in args.ks.split(",")]
    rows = retrieval_stats(g, examples, model, ks, args.beam_width, args.max_len, args.cap)
    print(f"{'K':>3}  {'mean paths':>12}  {'mean ms':>10}", file=sys.stderr)
    for r in rows:
        print(f"{r['k']:>3}  {r['mean_paths']:>12.2f}  {r['mean_ms']:>10.3f}", file=sys.stderr)
    if args.out:
        write_jsonl(rows, args.out)
    return {"rows": rows, "out": args.out}


# --- argument parsing -------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, *flags: str) -> None:
    p.add_argument("--config", help="JSON file whose keys mirror the long flags")
    if "graph" in flags:
        p.add_argument("--graph", help="graph snapshot (.npz) or triple file")
    if "qa" in flags:
        p.add_argument("--qa", help="QA examples (JSON lines)")
    if "max_hops" in flags:
        p.add_argument("--max-hops", type=int, default=DEFAULT_MAX_HOPS)
    if "cap" in flags:
        p.add_argument("--cap", type=int, default=DEFAULT_CAP,
                       help="max reasoning paths per plan (0 disables)")
    if "beam" in flags:
        p.add_argument("--k", type=int, default=DEFAULT_K)
        p.add_argument("--beam-width", type=int, default=DEFAULT_K)
        p.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    if "llm" in flags:
        p.add_argument("--llm-endpoint", default=None)
        p.add_argument("--max-in-flight", type=int, default=4)
    if "jobs" in flags:
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgreason", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic graph (and QA files)")
    _add_common(p)
    p.add_argument("--kind", choices=["example2", "zipf", "template"], default="example2")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--triples", type=int, default=1_000_000)
    p.add_argument("--entities", type=int, default=200_000)
    p.add_argument("--relations", type=int, default=500)
    p.add_argument("--train", type=int, default=400)
    p.add_argument("--test", type=int, default=200)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("index", help="build a graph snapshot from a triple file")
    _add_common(p)
    p.add_argument("--triples", help="tab-separated triple file")
    p.add_argument("--out", required=True)
    p.add_argument("--add-inverse", action="store_true")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("mine", help="mine shortest relation paths per question")
    _add_common(p, "graph", "qa", "max_hops", "jobs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("build-dataset", help="write instruction-tuning records")
    _add_common(p, "graph", "qa", "max_hops", "cap")
    p.add_argument("--kind", choices=["planning", "reasoning", "both"], default="both")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train-planner", help="fit the count planner on mined plans")
    _add_common(p, "graph")
    p.add_argument("--mined", help="output of `mine`")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_planner)

    p = sub.add_parser("plan", help="generate top-K plans per question")
    _add_common(p, "graph", "qa", "beam", "llm", "jobs")
    p.add_argument("--planner-mode", choices=["count", "llm"], default="count")
    p.add_argument("--planner", help="count planner dump")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("retrieve", help="ground plans into reasoning paths")
    _add_common(p, "graph", "qa", "cap", "jobs")
    p.add_argument("--plans", help="output of `plan`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("answer", help="reason answers from retrieved paths")
    _add_common(p, "graph", "qa", "llm")
    p.add_argument("--retrieved", help="output of `retrieve`")
    p.add_argument("--reasoner", choices=["all", "vote", "llm"], default="vote")
    p.add_argument("--vote-n", type=int, default=DEFAULT_VOTE_N)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("eval", help="Hits@1 / F1 with breakdown tables")
    _add_common(p, "qa")
    p.add_argument("--predictions", help="output of `answer`")
    p.add_argument("--hops", help="output of `mine`, for the per-hop breakdown")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("retrieval-stats", help="path count and latency versus top-K")
    _add_common(p, "graph", "qa", "beam", "cap")
    p.add_argument("--planner", help="count planner dump")
    p.add_argument("--ks", default="1,2,3,4,5")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_retrieval_stats)
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = json.loads(_need(args.config, "config").read_text(encoding="utf-8"))
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(k.replace("-", "_") for k in cfg) - known)
        if unknown:
            raise CliError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    if getattr(args, "cap", None) == 0:
        args.cap = None
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    random.seed(args.seed)
    try:
        summary = args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (TripleParseError, QAFormatError, PlanParseError, GraphLookupError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"error: malformed input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GenerationError as exc:
        print(f"error: generation service: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    print(json.dumps({"command": args.command, **summary}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
