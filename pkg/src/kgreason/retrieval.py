"""Ground relation-path plans into reasoning paths with a constrained BFS."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .graph import KnowledgeGraph
from .paths import ReasoningPath, RelationPath


@dataclass
class RetrievalResult:
    plan: RelationPath
    paths: list[ReasoningPath]
    truncated: bool = False
    elapsed: float = 0.0
    expanded_nodes: int = 0

    def terminals(self) -> list[int]:
        return [p.terminal for p in self.paths]


def _check_inputs(g: KnowledgeGraph, topic_entities: Iterable[int], z: Sequence[int]) -> list[int]:
    topics = sorted(set(topic_entities))
    if not topics:
        raise ValueError("retrieval needs at least one topic entity")
    for e in topics:
        g.vocab.check_entity(e)
    for r in z:
        g.vocab.check_relation(r)
    return topics


def retrieve_paths(g: KnowledgeGraph, topic_entities: Iterable[int], z: Sequence[int],
                   cap: Optional[int] = None) -> RetrievalResult:
    """All walks from a topic entity whose relation sequence is exactly ``z``.

    Output order is BFS discovery order: topic entities ascending, then
    neighbours ascending at every hop.  Entities may repeat inside a path.
    With ``cap`` the first ``cap`` paths are kept and ``truncated`` tells
    whether any were dropped.
    """
    t0 = time.perf_counter()
    z = tuple(z)
    topics = _check_inputs(g, topic_entities, z)
    if cap is not None and cap < 0:
        raise ValueError("cap must be non-negative")
    L = len(z)
    paths: list[ReasoningPath] = []
    truncated = False
    expanded = 0

    def emit(ents: tuple[int, ...]) -> bool:
        nonlocal truncated
        if cap is not None and len(paths) >= cap:
            truncated = True
            return False
        paths.append(ReasoningPath(ents, z))
        return True

    queue: deque[tuple[int, ...]] = deque()
    for e in topics:
        if L == 0:
            if not emit((e,)):
                break
        else:
            queue.append((e,))

    neighbors = g._neighbors
    while queue and not truncated:
        ents = queue.popleft()
        expanded += 1
        depth = len(ents) - 1
        r = z[depth]
        full = depth + 1 == L
        for t in neighbors(ents[-1], r):
            nxt = ents + (t,)
            if full:
                if not emit(nxt):
                    break
            else:
                queue.append(nxt)

    return RetrievalResult(z, paths, truncated, time.perf_counter() - t0, expanded)


def retrieve_for_plans(g: KnowledgeGraph, topic_entities: Iterable[int],
                       plans: Sequence[Sequence[int]],
                       cap: Optional[int] = None) -> list[RetrievalResult]:
    topics = list(topic_entities)
    return [retrieve_paths(g, topics, z, cap) for z in plans]


def summarize(results: Sequence[RetrievalResult]) -> dict:
    return {
        "plans": len(results),
        "paths": sum(len(r.paths) for r in results),
        "elapsed": sum(r.elapsed for r in results),
        "truncated": sum(r.truncated for r in results),
    }
