"""Answer extraction from retrieved reasoning paths, and the reasoning objective."""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence, Union

from .evaluation import normalize_answer
from .graph import Vocabulary
from .llm import GenerationClient, GenerationRequest
from .paths import ReasoningPath, RelationPath, serialize_reasoning_path
from .prompts import explanation_prompt, reasoning_prompt
from .retrieval import RetrievalResult

logger = logging.getLogger(__name__)

DEFAULT_VOTE_N = 5
DEFAULT_SCORER_ALPHA = 0.1

Answer = Union[int, str]


@dataclass
class AnswerSet:
    answers: list[tuple[Answer, float]]
    source: str
    diagnostic: Optional[str] = None

    def __len__(self) -> int:
        return len(self.answers)

    def items(self) -> list[Answer]:
        return [a for a, _ in self.answers]

    def names(self, vocab: Vocabulary) -> list[str]:
        return [vocab.entity_name(a) if isinstance(a, int) else a for a, _ in self.answers]


def answers_all(results: Iterable[RetrievalResult]) -> AnswerSet:
    """Every distinct terminal entity, scored by how many paths end there."""
    tally = Counter(p.terminal for res in results for p in res.paths)
    ranked = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))
    return AnswerSet([(e, float(c)) for e, c in ranked], "all")


def answers_vote(results: Iterable[RetrievalResult], n: int = DEFAULT_VOTE_N) -> AnswerSet:
    if n < 1:
        raise ValueError("n must be >= 1")
    return AnswerSet(answers_all(results).answers[:n], "vote")


def path_lines(results: Iterable[RetrievalResult], vocab: Vocabulary) -> list[str]:
    """Serialized reasoning paths across results, first occurrence kept."""
    seen: dict[str, None] = {}
    for res in results:
        for p in res.paths:
            seen.setdefault(serialize_reasoning_path(p, vocab), None)
    return list(seen)


_MARKER = re.compile(r"^(?:[-*•]|\d+[.)])\s*")


def parse_answer_list(text: str) -> list[str]:
    """Split a free-text answer list on newlines then commas.

    Leading list markers ("-", "*", "1.") are stripped and duplicates (after
    normalisation) dropped, keeping the first spelling.
    """
    out: list[str] = []
    seen: set[str] = set()
    for line in text.splitlines():
        for piece in line.split(","):
            item = _MARKER.sub("", piece.strip()).strip()
            key = normalize_answer(item)
            if key and key not in seen:
                seen.add(key)
                out.append(item)
    return out


def llm_reason(client: GenerationClient, question: str, results: Sequence[RetrievalResult],
               vocab: Vocabulary, max_new_tokens: int = 256) -> AnswerSet:
    prompt = reasoning_prompt(question, path_lines(results, vocab))
    completions = client.generate(GenerationRequest(prompt, max_new_tokens=max_new_tokens))
    answers = parse_answer_list(completions[0]) if completions else []
    if not answers:
        diag = "empty completion" if not completions else f"unparseable completion: {completions[0]!r}"
        logger.warning("llm_reason: %s", diag)
        return AnswerSet([], "llm", diag)
    return AnswerSet([(a, 1.0) for a in answers], "llm")


def build_explanation_prompt(question: str, results: Sequence[RetrievalResult], vocab: Vocabulary,
                             examples_block: str = "") -> str:
    return explanation_prompt(question, path_lines(results, vocab), examples_block)


class PathAnswerScorer(Protocol):
    def answer_logprob(self, question: str, paths: Sequence[ReasoningPath],
                       answer: Answer) -> float: ...


@dataclass
class FrequencyScorer:
    """log P(answer | one plan's paths) as a smoothed terminal frequency.

    ``(count(a) + alpha) / (n_paths + alpha * (n_terminals + 1))``; the extra
    slot holds every answer not seen among the terminals.
    """

    alpha: float = DEFAULT_SCORER_ALPHA

    def answer_logprob(self, question: str, paths: Sequence[ReasoningPath], answer: Answer) -> float:
        tally = Counter(p.terminal for p in paths)
        denom = len(paths) + self.alpha * (len(tally) + 1)
        return math.log((tally.get(answer, 0) + self.alpha) / denom)


def reasoning_loss(scorer: PathAnswerScorer, question: str, answer: Answer,
                   plans_with_paths: Sequence[tuple[RelationPath, Sequence[ReasoningPath]]],
                   mode: str = "fid") -> float:
    """Answer log-likelihood given retrieved paths for several plans.

    ``fid`` treats plans as independent and sums per-plan log-likelihoods;
    ``joint`` pools every path into one evidence set and scores once.
    """
    if not plans_with_paths:
        raise ValueError("reasoning loss needs at least one plan")
    if mode == "fid":
        return math.fsum(scorer.answer_logprob(question, paths, answer)
                         for _, paths in plans_with_paths)
    if mode == "joint":
        pooled = [p for _, paths in plans_with_paths for p in paths]
        return scorer.answer_logprob(question, pooled, answer)
    raise ValueError(f"unknown mode {mode!r}")


def combined_objective(planning_loss_value: float, reasoning_loglik: float) -> float:
    """Reasoning log-likelihood plus mean plan log-likelihood (= minus planning loss)."""
    return reasoning_loglik - planning_loss_value
