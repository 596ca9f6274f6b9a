"""Shortest relation paths between question and answer entities.

These are the supervision targets for the planner: every distinct relation
sequence realised by a shortest walk from a topic entity to an answer,
weighted uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional

from .graph import KnowledgeGraph
from .paths import RelationPath, serialize_plan

if TYPE_CHECKING:
    from .qa import QAExample

DEFAULT_MAX_HOPS = 4


@dataclass(frozen=True)
class MinedPlans:
    plans: tuple[RelationPath, ...]
    hop_count: int

    def __post_init__(self):
        if not self.plans:
            raise ValueError("MinedPlans needs at least one plan")
        if any(len(z) != self.hop_count for z in self.plans):
            raise ValueError("all mined plans must have length hop_count")

    @property
    def posterior_weight(self) -> float:
        return 1.0 / len(self.plans)

    def __len__(self) -> int:
        return len(self.plans)


def mine_shortest_relation_paths(g: KnowledgeGraph, topic_entities: Iterable[int],
                                 answer_entities: Iterable[int],
                                 max_hops: int = DEFAULT_MAX_HOPS) -> Optional[MinedPlans]:
    """Distinct relation sequences of globally shortest topic->answer walks.

    The distance is the minimum over all (topic, answer) pairs; only walks of
    exactly that length contribute.  Returns ``None`` when no answer is
    reachable within ``max_hops``.  Plans are sorted by relation ids.
    """
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    topics = set(topic_entities)
    answers = set(answer_entities)
    for e in topics | answers:
        g.vocab.check_entity(e)
    if not topics or not answers:
        return None
    if topics & answers:
        return MinedPlans(((),), 0)

    # Forward multi-source BFS by layer until an answer shows up.
    dist = {e: 0 for e in topics}
    frontier = sorted(topics)
    d = None
    for depth in range(1, max_hops + 1):
        nxt = []
        for s in frontier:
            for _, t in g.out_edges(s):
                if t not in dist:
                    dist[t] = depth
                    nxt.append(t)
        if not nxt:
            break
        if answers.intersection(nxt):
            d = depth
            break
        frontier = nxt
    if d is None:
        return None

    # Every shortest walk moves along edges that raise the BFS layer by one.
    memo: dict[int, frozenset[RelationPath]] = {}

    def suffixes(e: int) -> frozenset[RelationPath]:
        got = memo.get(e)
        if got is not None:
            return got
        layer = dist[e]
        if layer == d:
            out = frozenset({()}) if e in answers else frozenset()
        else:
            acc = set()
            for r, t in g.out_edges(e):
                if dist.get(t) == layer + 1:
                    for s in suffixes(t):
                        acc.add((r,) + s)
            out = frozenset(acc)
        memo[e] = out
        return out

    plans: set[RelationPath] = set()
    for e in topics:
        plans |= suffixes(e)
    return MinedPlans(tuple(sorted(plans)), d)


def planning_targets(example: "QAExample", g: KnowledgeGraph,
                     max_hops: int = DEFAULT_MAX_HOPS) -> list[tuple[str, str]]:
    """One (question, serialized plan) pair per mined plan."""
    topics = [g.vocab.entity_id(n) for n in example.topic_entities]
    answers = [g.vocab.entity_id(n) for n in example.answers]
    mined = mine_shortest_relation_paths(g, topics, answers, max_hops)
    if mined is None:
        return []
    return [(example.question, serialize_plan(z, g.vocab)) for z in mined.plans]
