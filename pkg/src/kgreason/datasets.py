"""Instruction-tuning records built from mined shortest paths.

Two record kinds:

* ``planning``: planning prompt -> serialized plan, one per mined plan.
* ``reasoning``: reasoning prompt over the paths retrieved with every mined
  plan -> gold answers joined by newlines.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .graph import KnowledgeGraph
from .mining import DEFAULT_MAX_HOPS, MinedPlans, mine_shortest_relation_paths
from .paths import serialize_plan
from .prompts import planning_prompt, reasoning_prompt
from .qa import QAExample, resolve
from .reasoning import path_lines
from .retrieval import retrieve_for_plans

logger = logging.getLogger(__name__)

KINDS = ("planning", "reasoning")


@dataclass
class InstructionRecord:
    kind: str
    input: str
    target: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


@dataclass
class BuildReport:
    examples: int = 0
    records: int = 0
    skipped: dict[str, int] = field(default_factory=dict)
    missing_entities: int = 0

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    @property
    def skip_count(self) -> int:
        return sum(self.skipped.values())


def mine_example(ex: QAExample, g: KnowledgeGraph, max_hops: int = DEFAULT_MAX_HOPS,
                 report: Optional[BuildReport] = None) -> tuple[Optional[MinedPlans], list[int]]:
    """Mine one example, tolerating names absent from the graph.

    Returns (mined plans or None, resolved topic ids).  Skip reasons are
    recorded on ``report``.
    """
    topics, miss_t = resolve(g.vocab, ex.topic_entities)
    answers, miss_a = resolve(g.vocab, ex.answers)
    if report is not None:
        report.missing_entities += len(miss_t) + len(miss_a)
    if not topics:
        if report is not None:
            report.skip("topic_not_in_graph")
        return None, topics
    if not answers:
        if report is not None:
            report.skip("answer_not_in_graph")
        return None, topics
    mined = mine_shortest_relation_paths(g, topics, answers, max_hops)
    if mined is None and report is not None:
        report.skip("no_path_within_max_hops")
    return mined, topics


def build_planning_dataset(examples: Iterable[QAExample], g: KnowledgeGraph,
                           max_hops: int = DEFAULT_MAX_HOPS,
                           report: Optional[BuildReport] = None) -> list[InstructionRecord]:
    report = report if report is not None else BuildReport()
    out = []
    for ex in examples:
        report.examples += 1
        mined, _ = mine_example(ex, g, max_hops, report)
        if mined is None:
            continue
        prompt = planning_prompt(ex.question)
        for z in mined.plans:
            out.append(InstructionRecord("planning", prompt, serialize_plan(z, g.vocab)))
    report.records = len(out)
    return out


def build_reasoning_dataset(examples: Iterable[QAExample], g: KnowledgeGraph,
                            max_hops: int = DEFAULT_MAX_HOPS, cap: Optional[int] = None,
                            report: Optional[BuildReport] = None) -> list[InstructionRecord]:
    report = report if report is not None else BuildReport()
    out = []
    for ex in examples:
        report.examples += 1
        mined, topics = mine_example(ex, g, max_hops, report)
        if mined is None:
            continue
        results = retrieve_for_plans(g, topics, mined.plans, cap)
        lines = path_lines(results, g.vocab)
        if not lines:
            report.skip("no_paths_retrieved")
            continue
        out.append(InstructionRecord("reasoning", reasoning_prompt(ex.question, lines),
                                     "\n".join(ex.answers)))
    report.records = len(out)
    return out


def write_records(records: Sequence[InstructionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(rec.to_json() + "\n")


def read_records(path: str | Path) -> list[InstructionRecord]:
    with open(path, encoding="utf-8") as f:
        return [InstructionRecord(**json.loads(line)) for line in f if line.strip()]
