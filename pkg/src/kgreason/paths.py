"""Relation paths (plans) and reasoning paths, plus their text forms.

A relation path is a plain ``tuple`` of relation ids so it hashes, compares
lexicographically and can be used directly as a dict key.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .graph import GraphLookupError, KnowledgeGraph, Vocabulary

RelationPath = tuple[int, ...]

PATH_START = "<PATH>"
PATH_SEP = "<SEP>"
PATH_END = "</PATH>"
ARROW = " -> "


class PlanParseError(ValueError):
    pass


@dataclass(frozen=True)
class ReasoningPath:
    entities: tuple[int, ...]
    relations: tuple[int, ...]

    def __post_init__(self):
        if len(self.entities) != len(self.relations) + 1:
            raise ValueError("a reasoning path needs exactly one more entity than relations")

    @property
    def start(self) -> int:
        return self.entities[0]

    @property
    def terminal(self) -> int:
        return self.entities[-1]

    def __len__(self) -> int:
        return len(self.relations)

    def hops(self):
        for i, r in enumerate(self.relations):
            yield self.entities[i], r, self.entities[i + 1]

    def is_grounded_in(self, g: KnowledgeGraph) -> bool:
        return all(g.has_triple(s, r, t) for s, r, t in self.hops())


def serialize_plan(z: Sequence[int], vocab: Vocabulary) -> str:
    if not z:
        return f"{PATH_START} {PATH_END}"
    body = f" {PATH_SEP} ".join(vocab.relation_name(r) for r in z)
    return f"{PATH_START} {body} {PATH_END}"


def parse_plan(text: str, vocab: Vocabulary) -> RelationPath:
    """Inverse of :func:`serialize_plan`; unknown relation names are an error."""
    s = text.strip()
    if not s.startswith(PATH_START):
        raise PlanParseError(f"missing {PATH_START}: {text!r}")
    if not s.endswith(PATH_END):
        raise PlanParseError(f"missing {PATH_END}: {text!r}")
    inner = s[len(PATH_START):len(s) - len(PATH_END)].strip()
    if not inner:
        return ()
    out = []
    for seg in inner.split(PATH_SEP):
        name = seg.strip()
        if not name:
            raise PlanParseError(f"empty relation between separators: {text!r}")
        try:
            out.append(vocab.relation_id(name))
        except GraphLookupError as exc:
            raise PlanParseError(str(exc)) from None
    return tuple(out)


def serialize_reasoning_path(w: ReasoningPath, vocab: Vocabulary) -> str:
    parts = [vocab.entity_name(w.entities[0])]
    for r, e in zip(w.relations, w.entities[1:]):
        parts.append(vocab.relation_name(r))
        parts.append(vocab.entity_name(e))
    return ARROW.join(parts)


def parse_reasoning_path(text: str, vocab: Vocabulary) -> ReasoningPath:
    parts = text.split(ARROW)
    if len(parts) % 2 == 0:
        raise ValueError(f"reasoning path must alternate entity/relation: {text!r}")
    ents = tuple(vocab.entity_id(p) for p in parts[0::2])
    rels = tuple(vocab.relation_id(p) for p in parts[1::2])
    return ReasoningPath(ents, rels)
