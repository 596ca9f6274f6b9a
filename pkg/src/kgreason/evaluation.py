"""Hits@1 / precision / recall / F1 over answer sets, with breakdown buckets."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

_WS = re.compile(r"\s+")

ANSWER_BUCKETS = ("#Ans=1", "#Ans=2-4", "#Ans=5-9", "#Ans>=10")
HOP_BUCKETS = ("1 hop", "2 hop", ">=3 hop")


class ScoringError(ValueError):
    pass


def normalize_answer(text: str) -> str:
    """Trim, lowercase and collapse internal whitespace."""
    return _WS.sub(" ", str(text).strip().lower())


def hits_at_1(predicted: Sequence[str], gold: Iterable[str]) -> int:
    if not predicted:
        return 0
    return int(normalize_answer(predicted[0]) in {normalize_answer(g) for g in gold})


def f1_set(predicted: Iterable[str], gold: Iterable[str]) -> tuple[float, float, float]:
    """(precision, recall, f1) with set semantics after normalisation."""
    pred = {normalize_answer(p) for p in predicted}
    ref = {normalize_answer(g) for g in gold}
    if not ref:
        raise ScoringError("gold answer set is empty")
    hit = len(pred & ref)
    p = hit / len(pred) if pred else 0.0
    r = hit / len(ref)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def answer_bucket(n_answers: int) -> str:
    if n_answers <= 1:
        return ANSWER_BUCKETS[0]
    if n_answers <= 4:
        return ANSWER_BUCKETS[1]
    if n_answers <= 9:
        return ANSWER_BUCKETS[2]
    return ANSWER_BUCKETS[3]


def hop_bucket(hops: int) -> Optional[str]:
    """Bucket for a hop count; ``None`` for zero-hop questions."""
    if hops < 1:
        return None
    return HOP_BUCKETS[min(hops, 3) - 1]


@dataclass
class QuestionScore:
    id: str
    hit: int
    precision: float
    recall: float
    f1: float


@dataclass
class Metrics:
    count: int = 0
    hits_at_1: float = 0.0
    macro_precision: float = 0.0
    macro_recall: float = 0.0
    macro_f1: float = 0.0

    @classmethod
    def of(cls, scores: Sequence[QuestionScore]) -> "Metrics":
        n = len(scores)
        if not n:
            return cls()
        return cls(n,
                   sum(s.hit for s in scores) / n,
                   sum(s.precision for s in scores) / n,
                   sum(s.recall for s in scores) / n,
                   sum(s.f1 for s in scores) / n)


@dataclass
class EvalReport:
    overall: Metrics
    per_question: list[QuestionScore]
    by_answer_count: dict[str, Metrics] = field(default_factory=dict)
    by_hops: dict[str, Metrics] = field(default_factory=dict)

    @property
    def hits_at_1(self) -> float:
        return self.overall.hits_at_1

    @property
    def macro_f1(self) -> float:
        return self.overall.macro_f1

    @property
    def macro_precision(self) -> float:
        return self.overall.macro_precision

    @property
    def macro_recall(self) -> float:
        return self.overall.macro_recall

    def to_json(self) -> dict:
        return {
            "overall": asdict(self.overall),
            "by_answer_count": {k: asdict(v) for k, v in self.by_answer_count.items()},
            "by_hops": {k: asdict(v) for k, v in self.by_hops.items()},
            "per_question": [asdict(q) for q in self.per_question],
        }

    def table(self) -> str:
        rows = [("bucket", "n", "Hits@1", "P", "R", "F1"), _row("all", self.overall)]
        rows += [_row(k, v) for k, v in self.by_answer_count.items()]
        rows += [_row(k, v) for k, v in self.by_hops.items()]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        return "\n".join("  ".join(c.rjust(w) if i else c.ljust(w)
                                   for i, (c, w) in enumerate(zip(r, widths)))
                         for r in rows)


def _row(name: str, m: Metrics) -> tuple[str, ...]:
    return (name, str(m.count), f"{m.hits_at_1:.4f}", f"{m.macro_precision:.4f}",
            f"{m.macro_recall:.4f}", f"{m.macro_f1:.4f}")


def evaluate_run(predictions: Mapping[str, Sequence[str]], gold: Mapping[str, Sequence[str]],
                 hops: Optional[Mapping[str, int]] = None) -> EvalReport:
    """Score predictions keyed by question id against gold answers.

    Questions without a prediction count as empty predictions.  Unknown
    prediction ids are an error.
    """
    unknown = sorted(set(predictions) - set(gold))
    if unknown:
        raise ScoringError(f"predictions for unknown ids: {', '.join(unknown)}")
    scores = []
    for qid, answers in gold.items():
        pred = list(predictions.get(qid, ()))
        p, r, f1 = f1_set(pred, answers)
        scores.append(QuestionScore(qid, hits_at_1(pred, answers), p, r, f1))

    by_ans: dict[str, list[QuestionScore]] = {b: [] for b in ANSWER_BUCKETS}
    for s in scores:
        n = len({normalize_answer(a) for a in gold[s.id]})
        by_ans[answer_bucket(n)].append(s)
    by_hop: dict[str, list[QuestionScore]] = {}
    if hops is not None:
        by_hop = {b: [] for b in HOP_BUCKETS}
        for s in scores:
            if s.id in hops:
                b = hop_bucket(hops[s.id])
                if b is not None:
                    by_hop[b].append(s)
    return EvalReport(
        Metrics.of(scores), scores,
        {k: Metrics.of(v) for k, v in by_ans.items()},
        {k: Metrics.of(v) for k, v in by_hop.items()},
    )


def report_json(report: EvalReport) -> str:
    return json.dumps(report.to_json(), indent=2)
