"""Relation-path planners, beam decoding and the planning loss.

A planner scores one step at a time: given a question and a plan prefix it
returns log-probabilities over every relation id plus ``STOP``.  A plan's
log-probability is the sum of its step scores, including the final STOP.
"""

from __future__ import annotations

import math
import random
import re
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

from .graph import GraphLookupError, Vocabulary
from .llm import GenerationClient, GenerationRequest
from .mining import MinedPlans
from .paths import PlanParseError, RelationPath, parse_plan
from .prompts import planning_prompt

STOP = -1
DEFAULT_ALPHA = 0.1
DEFAULT_MAX_LEN = 4
DEFAULT_K = 3

STOP_WORDS = frozenset("""
a an the of in on at to for from by with about as into over under and or but not no
is are was were be been being am do does did done has have had having will would shall
should can could may might must what which who whom whose where when why how that this
these those there here it its it's he she they them his her their we our you your i me my
s t if than then so such very just also any all some each every both either neither
""".split())

_WORD = re.compile(r"[a-z0-9]+")


@lru_cache(maxsize=65536)
def question_features(question: str) -> frozenset[str]:
    """Lowercase alphanumeric words of the question, minus stop-words."""
    return frozenset(w for w in _WORD.findall(question.lower()) if w not in STOP_WORDS)


class PlannerModel(Protocol):
    def next_step_logprobs(self, question: str, prefix: Sequence[int]) -> dict[int, float]: ...


class UniformPlanner:
    """Every relation and STOP equally likely; STOP forced at ``max_len``."""

    def __init__(self, num_relations: int, max_len: int = DEFAULT_MAX_LEN):
        self.num_relations = num_relations
        self.max_len = max_len

    def next_step_logprobs(self, question: str, prefix: Sequence[int]) -> dict[int, float]:
        if len(prefix) >= self.max_len:
            return {STOP: 0.0}
        lp = -math.log(self.num_relations + 1)
        out = dict.fromkeys(range(self.num_relations), lp)
        out[STOP] = lp
        return out


Counts = dict[int, int]


class CountPlanner:
    """Add-alpha smoothed transition counts with question-word backoff.

    The next-step distribution is estimated from the first level that has
    data for the current prefix:

    1. the question's exact content-word set,
    2. counts summed over each content word of the question seen in training,
    3. the prefix alone,
    4. uniform.
    """

    def __init__(self, vocab: Vocabulary, alpha: float = DEFAULT_ALPHA,
                 max_len: int = DEFAULT_MAX_LEN):
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        self.vocab = vocab
        self.num_relations = vocab.num_relations
        self.alpha = alpha
        self.max_len = max_len
        self.exact: dict[tuple[frozenset[str], RelationPath], Counts] = defaultdict(dict)
        self.by_word: dict[tuple[str, RelationPath], Counts] = defaultdict(dict)
        self.by_prefix: dict[RelationPath, Counts] = defaultdict(dict)

    def add(self, question: str, plan: Sequence[int]) -> None:
        plan = tuple(plan)
        if len(plan) > self.max_len:
            raise ValueError(f"plan longer than max_len={self.max_len}: {plan}")
        for r in plan:
            self.vocab.check_relation(r)
        feats = question_features(question)
        for i in range(len(plan) + 1):
            prefix = plan[:i]
            nxt = plan[i] if i < len(plan) else STOP
            _bump(self.exact[(feats, prefix)], nxt)
            for w in feats:
                _bump(self.by_word[(w, prefix)], nxt)
            _bump(self.by_prefix[prefix], nxt)

    def _counts_for(self, question: str, prefix: RelationPath) -> Optional[Counts]:
        feats = question_features(question)
        c = self.exact.get((feats, prefix))
        if c:
            return c
        merged: Counts = {}
        for w in sorted(feats):
            wc = self.by_word.get((w, prefix))
            if wc:
                for sym, n in wc.items():
                    merged[sym] = merged.get(sym, 0) + n
        if merged:
            return merged
        return self.by_prefix.get(prefix) or None

    def next_step_logprobs(self, question: str, prefix: Sequence[int]) -> dict[int, float]:
        prefix = tuple(prefix)
        if len(prefix) >= self.max_len:
            return {STOP: 0.0}
        support = self.num_relations + 1
        counts = self._counts_for(question, prefix)
        if not counts:
            lp = -math.log(support)
            out = dict.fromkeys(range(self.num_relations), lp)
            out[STOP] = lp
            return out
        denom = sum(counts.values()) + self.alpha * support
        base = math.log(self.alpha / denom)
        out = dict.fromkeys(range(self.num_relations), base)
        out[STOP] = base
        for sym, n in counts.items():
            out[sym] = math.log((n + self.alpha) / denom)
        return out

    # persistence ------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write the versioned, line-based text dump (format in README)."""
        names = self.vocab.relation_names

        def sym(s: int) -> str:
            return "STOP" if s == STOP else str(s)

        def pre(p: RelationPath) -> str:
            return " ".join(map(str, p)) if p else "-"

        lines = [f"kgreason-count-planner\t{_FORMAT_VERSION}",
                 f"alpha\t{self.alpha!r}",
                 f"max_len\t{self.max_len}",
                 f"relations\t{len(names)}"]
        lines += [f"\t{n}" for n in names]
        for (feats, p), c in sorted(self.exact.items(), key=lambda kv: (sorted(kv[0][0]), kv[0][1])):
            for s, n in sorted(c.items()):
                lines.append(f"exact\t{' '.join(sorted(feats))}\t{pre(p)}\t{sym(s)}\t{n}")
        for (w, p), c in sorted(self.by_word.items()):
            for s, n in sorted(c.items()):
                lines.append(f"word\t{w}\t{pre(p)}\t{sym(s)}\t{n}")
        for p, c in sorted(self.by_prefix.items()):
            for s, n in sorted(c.items()):
                lines.append(f"prefix\t{pre(p)}\t{sym(s)}\t{n}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, vocab: Vocabulary) -> "CountPlanner":
        """Read a dump, remapping its relation names onto ``vocab`` ids."""
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        head = lines[0].split("\t")
        if head[0] != "kgreason-count-planner" or head[1] != str(_FORMAT_VERSION):
            raise ValueError(f"{path}: not a version-{_FORMAT_VERSION} count planner dump")
        alpha = float(lines[1].split("\t")[1])
        max_len = int(lines[2].split("\t")[1])
        n = int(lines[3].split("\t")[1])
        try:
            remap = [vocab.relation_id(line[1:]) for line in lines[4:4 + n]]
        except GraphLookupError as exc:
            raise ValueError(f"{path}: planner relation not in graph: {exc}") from None
        model = cls(vocab, alpha=alpha, max_len=max_len)

        def sym(s: str) -> int:
            return STOP if s == "STOP" else remap[int(s)]

        def pre(s: str) -> RelationPath:
            return () if s == "-" else tuple(remap[int(x)] for x in s.split(" "))

        for line in lines[4 + n:]:
            if not line:
                continue
            f = line.split("\t")
            if f[0] == "exact":
                feats = frozenset(f[1].split(" ")) if f[1] else frozenset()
                model.exact[(feats, pre(f[2]))][sym(f[3])] = int(f[4])
            elif f[0] == "word":
                model.by_word[(f[1], pre(f[2]))][sym(f[3])] = int(f[4])
            elif f[0] == "prefix":
                model.by_prefix[pre(f[1])][sym(f[2])] = int(f[3])
            else:
                raise ValueError(f"{path}: unknown record type {f[0]!r}")
        return model


_FORMAT_VERSION = 1


def _bump(c: Counts, key: int) -> None:
    c[key] = c.get(key, 0) + 1


def fit_count_planner(pairs: Iterable[tuple[str, Sequence[int]]], vocab: Vocabulary,
                      alpha: float = DEFAULT_ALPHA, max_len: int = DEFAULT_MAX_LEN) -> CountPlanner:
    model = CountPlanner(vocab, alpha=alpha, max_len=max_len)
    n = 0
    for question, plan in pairs:
        model.add(question, plan)
        n += 1
    if n == 0:
        raise ValueError("cannot fit a planner on an empty training set")
    return model


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = DEFAULT_K
    k: int = DEFAULT_K
    max_len: int = DEFAULT_MAX_LEN

    def __post_init__(self):
        if self.beam_width < 1 or self.k < 1 or self.max_len < 1:
            raise ValueError("beam_width, k and max_len must be positive")
        if self.k > self.beam_width:
            raise ValueError("k must not exceed beam_width")


def plan_logprob(model: PlannerModel, question: str, plan: Sequence[int],
                 max_len: Optional[int] = None) -> float:
    """Sum of step log-probs; the STOP step is omitted for plans ending at ``max_len``."""
    plan = tuple(plan)
    total = 0.0
    for i, r in enumerate(plan):
        total += model.next_step_logprobs(question, plan[:i]).get(r, -math.inf)
    if max_len is None or len(plan) < max_len:
        total += model.next_step_logprobs(question, plan).get(STOP, -math.inf)
    return total


def _rank_key(item: tuple[RelationPath, float]):
    return (-item[1], item[0])


def generate_plans(model: PlannerModel, question: str,
                   cfg: BeamConfig = BeamConfig()) -> list[tuple[RelationPath, float]]:
    """Top-k plans by beam search, best first; ties go to the smaller id sequence."""
    alive: list[tuple[RelationPath, float]] = [((), 0.0)]
    finished: list[tuple[RelationPath, float]] = []
    while alive:
        grown = []
        for prefix, score in alive:
            for sym, lp in model.next_step_logprobs(question, prefix).items():
                if lp == -math.inf:
                    continue
                if sym == STOP:
                    finished.append((prefix, score + lp))
                    continue
                seq = prefix + (sym,)
                if len(seq) == cfg.max_len:
                    finished.append((seq, score + lp))
                else:
                    grown.append((seq, score + lp))
        grown.sort(key=_rank_key)
        alive = grown[: cfg.beam_width]
        if alive and len(finished) >= cfg.k:
            finished.sort(key=_rank_key)
            # Scores never increase along a path.
            if alive[0][1] < finished[cfg.k - 1][1]:
                break
    finished.sort(key=_rank_key)
    return finished[: cfg.k]


def planning_loss(model: PlannerModel, question: str, mined: MinedPlans) -> float:
    """Mean negative log-likelihood of the mined shortest plans."""
    if mined is None or not len(mined):
        raise ValueError("planning loss needs a non-empty set of mined plans")
    return -sum(plan_logprob(model, question, z) for z in mined.plans) / len(mined.plans)


def llm_generate_plans(client: GenerationClient, question: str, vocab: Vocabulary,
                       k: int = DEFAULT_K, temperature: float = 0.0,
                       max_new_tokens: int = 128) -> list[RelationPath]:
    """Ask a generation service for ``k`` plans; unparseable ones are dropped.

    Greedy decoding (temperature 0) with ``k`` completions is a guess at
    sensible defaults; the original decoding settings are not known.
    """
    req = GenerationRequest(planning_prompt(question), num_completions=k,
                            max_new_tokens=max_new_tokens, temperature=temperature)
    out: list[RelationPath] = []
    for text in client.generate(req):
        try:
            z = parse_plan(text, vocab)
        except PlanParseError:
            continue
        if z not in out:
            out.append(z)
    return out


def random_plans(rng: random.Random, num_relations: int, lengths: Sequence[int]) -> list[RelationPath]:
    return [tuple(rng.randrange(num_relations) for _ in range(n)) for n in lengths]
