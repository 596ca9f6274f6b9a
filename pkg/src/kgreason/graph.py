"""Interned triple store with a relation-indexed adjacency.

Triples are kept as three parallel int arrays sorted by (subject, relation,
object) with duplicates removed, plus a per-subject offset table, i.e. a CSR
layout.  ``neighbors(e, r)`` is two binary searches inside the subject's row.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

INVERSE_SUFFIX = "_inv"


class GraphLookupError(LookupError):
    """An entity/relation name or id does not resolve in the vocabulary."""


class TripleParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class Triple(NamedTuple):
    subject: int
    relation: int
    object: int


@dataclass
class _Interner:
    names: list[str] = field(default_factory=list)
    ids: dict[str, int] = field(default_factory=dict)

    def intern(self, name: str) -> int:
        i = self.ids.get(name)
        if i is None:
            i = len(self.names)
            self.ids[name] = i
            self.names.append(name)
        return i

    def __len__(self) -> int:
        return len(self.names)


class Vocabulary:
    """Bidirectional name <-> dense id maps for entities and relations.

    Ids are assigned in first-seen order.
    """

    def __init__(self, entities: Iterable[str] = (), relations: Iterable[str] = ()):
        self._ent = _Interner()
        self._rel = _Interner()
        for name in entities:
            self._ent.intern(name)
        for name in relations:
            self._rel.intern(name)

    def intern_entity(self, name: str) -> int:
        return self._ent.intern(name)

    def intern_relation(self, name: str) -> int:
        return self._rel.intern(name)

    @property
    def num_entities(self) -> int:
        return len(self._ent)

    @property
    def num_relations(self) -> int:
        return len(self._rel)

    @property
    def entity_names(self) -> list[str]:
        return self._ent.names

    @property
    def relation_names(self) -> list[str]:
        return self._rel.names

    def entity_id(self, name: str) -> int:
        try:
            return self._ent.ids[name]
        except KeyError:
            raise GraphLookupError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._rel.ids[name]
        except KeyError:
            raise GraphLookupError(f"unknown relation {name!r}") from None

    def has_entity(self, name: str) -> bool:
        return name in self._ent.ids

    def has_relation(self, name: str) -> bool:
        return name in self._rel.ids

    def entity_name(self, i: int) -> str:
        if not 0 <= i < len(self._ent):
            raise GraphLookupError(f"unknown entity id {i}")
        return self._ent.names[i]

    def relation_name(self, i: int) -> str:
        if not 0 <= i < len(self._rel):
            raise GraphLookupError(f"unknown relation id {i}")
        return self._rel.names[i]

    def check_entity(self, i: int) -> int:
        if not 0 <= i < len(self._ent):
            raise GraphLookupError(f"unknown entity id {i}")
        return i

    def check_relation(self, i: int) -> int:
        if not 0 <= i < len(self._rel):
            raise GraphLookupError(f"unknown relation id {i}")
        return i


class KnowledgeGraph:
    """Immutable directed multi-relational graph.

    Build with :func:`build_graph` or :meth:`from_ids`; do not mutate the
    arrays afterwards.
    """

    def __init__(self, vocab: Vocabulary, subjects: np.ndarray, relations: np.ndarray,
                 objects: np.ndarray):
        n = vocab.num_entities
        self.vocab = vocab
        self._s = subjects
        self._r = relations
        self._o = objects
        self._offsets = np.zeros(n + 1, dtype=np.int64)
        if len(subjects):
            np.cumsum(np.bincount(subjects, minlength=n), out=self._offsets[1:])
        self.relation_index = np.bincount(relations, minlength=vocab.num_relations).astype(np.int64)
        for arr in (self._s, self._r, self._o, self._offsets, self.relation_index):
            arr.setflags(write=False)

    @classmethod
    def from_ids(cls, vocab: Vocabulary, triples: np.ndarray) -> "KnowledgeGraph":
        """Sort and dedupe an (n, 3) int array of (s, r, o) ids."""
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        if len(triples):
            order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
            triples = triples[order]
            keep = np.ones(len(triples), dtype=bool)
            keep[1:] = np.any(triples[1:] != triples[:-1], axis=1)
            triples = triples[keep]
        return cls(vocab, np.ascontiguousarray(triples[:, 0]),
                   np.ascontiguousarray(triples[:, 1]), np.ascontiguousarray(triples[:, 2]))

    def __len__(self) -> int:
        return len(self._s)

    @property
    def num_triples(self) -> int:
        return len(self._s)

    def stats(self) -> dict[str, int]:
        return {
            "entities": self.vocab.num_entities,
            "relations": self.vocab.num_relations,
            "triples": self.num_triples,
        }

    def neighbors(self, e: int, r: int) -> list[int]:
        """Objects t with (e, r, t) in the graph, ascending."""
        self.vocab.check_entity(e)
        self.vocab.check_relation(r)
        return self._neighbors(e, r)

    def _neighbors(self, e: int, r: int) -> list[int]:
        lo, hi = self._offsets[e], self._offsets[e + 1]
        if lo == hi:
            return []
        rels = self._r[lo:hi]
        a = lo + np.searchsorted(rels, r, "left")
        b = lo + np.searchsorted(rels, r, "right")
        return self._o[a:b].tolist()

    def out_edges(self, e: int) -> list[tuple[int, int]]:
        """All (relation, object) pairs leaving ``e``, sorted."""
        self.vocab.check_entity(e)
        lo, hi = self._offsets[e], self._offsets[e + 1]
        return list(zip(self._r[lo:hi].tolist(), self._o[lo:hi].tolist()))

    def has_triple(self, s: int, r: int, o: int) -> bool:
        lo, hi = self._offsets[s], self._offsets[s + 1]
        if lo == hi:
            return False
        rels = self._r[lo:hi]
        a = lo + np.searchsorted(rels, r, "left")
        b = lo + np.searchsorted(rels, r, "right")
        objs = self._o[a:b]
        k = np.searchsorted(objs, o)
        return bool(k < len(objs) and objs[k] == o)

    def triples(self) -> Iterator[Triple]:
        for s, r, o in zip(self._s.tolist(), self._r.tolist(), self._o.tolist()):
            yield Triple(s, r, o)

    def triple_array(self) -> np.ndarray:
        return np.stack([self._s, self._r, self._o], axis=1)

    def adjacency(self) -> Iterator[tuple[tuple[int, int], list[int]]]:
        """Yield ((subject, relation), sorted objects) for every non-empty key."""
        if not len(self._s):
            return
        key_change = np.ones(len(self._s), dtype=bool)
        key_change[1:] = (self._s[1:] != self._s[:-1]) | (self._r[1:] != self._r[:-1])
        starts = np.flatnonzero(key_change).tolist() + [len(self._s)]
        for a, b in zip(starts, starts[1:]):
            yield (int(self._s[a]), int(self._r[a])), self._o[a:b].tolist()

    def name_triples(self) -> Iterator[tuple[str, str, str]]:
        ents, rels = self.vocab.entity_names, self.vocab.relation_names
        for s, r, o in self.triples():
            yield ents[s], rels[r], ents[o]

    def save(self, path: str | Path) -> None:
        """Write an ``.npz`` snapshot; :meth:`load` restores identical ids."""
        names = json.dumps({"entities": self.vocab.entity_names,
                            "relations": self.vocab.relation_names})
        np.savez_compressed(
            path,
            triples=self.triple_array(),
            names=np.frombuffer(names.encode("utf-8"), dtype=np.uint8),
        )

    @classmethod
    def load(cls, path: str | Path) -> "KnowledgeGraph":
        with np.load(path) as data:
            names = json.loads(data["names"].tobytes().decode("utf-8"))
            triples = data["triples"]
        vocab = Vocabulary(names["entities"], names["relations"])
        return cls.from_ids(vocab, triples)


def read_triples(lines: Iterable[str]) -> Iterator[tuple[str, str, str]]:
    """Parse tab-separated ``subject relation object`` lines.

    Blank lines and lines starting with ``#`` are skipped.
    """
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise TripleParseError(lineno, f"expected 3 tab-separated fields, got {len(parts)}")
        yield parts[0], parts[1], parts[2]


def build_graph(triples: Iterable[tuple[str, str, str]], add_inverse: bool = False) -> KnowledgeGraph:
    """Intern a stream of name triples into a :class:`KnowledgeGraph`.

    With ``add_inverse`` every (s, r, t) also yields (t, r + "_inv", s).
    """
    vocab = Vocabulary()
    ent, rel = vocab.intern_entity, vocab.intern_relation
    flat: list[int] = []
    append = flat.extend
    for lineno, rec in enumerate(triples, 1):
        if len(rec) != 3:
            raise TripleParseError(lineno, f"expected 3 fields, got {len(rec)}")
        s, r, o = rec
        si, oi = ent(s), ent(o)
        append((si, rel(r), oi))
        if add_inverse:
            append((oi, rel(r + INVERSE_SUFFIX), si))
    arr = np.array(flat, dtype=np.int64).reshape(-1, 3)
    g = KnowledgeGraph.from_ids(vocab, arr)
    logger.debug("built graph %s", g.stats())
    return g


def load_graph_file(path: str | Path, add_inverse: bool = False) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as f:
        return build_graph(read_triples(f), add_inverse=add_inverse)


def write_triples(g: KnowledgeGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s, r, o in g.name_triples():
            f.write(f"{s}\t{r}\t{o}\n")
