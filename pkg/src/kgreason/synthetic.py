"""Seeded synthetic graphs and QA tasks for tests, benchmarks and demos."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .graph import KnowledgeGraph, build_graph
from .qa import QAExample
from .retrieval import retrieve_paths
from .paths import RelationPath


def random_triples(rng: random.Random, n_entities: int, n_relations: int,
                   n_triples: int) -> list[tuple[str, str, str]]:
    """Uniform random name triples (duplicates possible)."""
    return [(f"e{rng.randrange(n_entities)}", f"r{rng.randrange(n_relations)}",
             f"e{rng.randrange(n_entities)}") for _ in range(n_triples)]


def random_graph(rng: random.Random, max_entities: int = 50, max_relations: int = 5,
                 max_triples: int = 300) -> tuple[KnowledgeGraph, list[tuple[str, str, str]]]:
    """Small random graph with sizes drawn up to the given bounds."""
    n_e = rng.randint(2, max_entities)
    n_r = rng.randint(1, max_relations)
    n_t = rng.randint(1, max_triples)
    raw = random_triples(rng, n_e, n_r, n_t)
    return build_graph(raw), raw


def zipf_triples(n_triples: int, n_entities: int, n_relations: int, seed: int = 0,
                 exponent: float = 1.1) -> Iterator[tuple[str, str, str]]:
    """Triples with Zipf-distributed relation frequencies and uniform endpoints."""
    gen = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n_relations + 1) ** exponent
    weights /= weights.sum()
    s = gen.integers(0, n_entities, n_triples)
    r = gen.choice(n_relations, size=n_triples, p=weights)
    o = gen.integers(0, n_entities, n_triples)
    for a, b, c in zip(s.tolist(), r.tolist(), o.tolist()):
        yield f"m.{a}", f"rel.{b}", f"m.{c}"


@dataclass
class TemplateTask:
    graph: KnowledgeGraph
    train: list[QAExample]
    test: list[QAExample]
    templates: list[RelationPath]
    phrases: list[str]


def _question(phrase: str, entity: str) -> str:
    return f"what is the {phrase} of {entity}"


def make_template_task(seed: int = 0, n_entities: int = 2000, n_relations: int = 8,
                       n_triples: int = 16000, n_templates: int = 6, n_train: int = 400,
                       n_test: int = 200, max_len: int = 3) -> TemplateTask:
    """Questions generated from relation-path templates over a random graph.

    Each template is a random relation sequence paired with a made-up phrase;
    a question instantiates the phrase with a topic entity from which the
    template's path exists, and its answers are the path's terminals.
    """
    rng = random.Random(seed)
    g = build_graph(random_triples(rng, n_entities, n_relations, n_triples))
    n_rel = g.vocab.num_relations
    templates: list[RelationPath] = []
    while len(templates) < n_templates:
        z = tuple(rng.randrange(n_rel) for _ in range(rng.randint(1, max_len)))
        if z not in templates:
            templates.append(z)
    phrases = [" ".join(f"w{t}x{j}" for j in range(2)) for t in range(n_templates)]

    def sample(count: int, prefix: str, used: set[int]) -> list[QAExample]:
        out: list[QAExample] = []
        attempts = 0
        while len(out) < count:
            attempts += 1
            if attempts > count * 200:
                raise RuntimeError("could not sample enough grounded questions")
            t = rng.randrange(n_templates)
            e = rng.randrange(g.vocab.num_entities)
            if e in used:
                continue
            res = retrieve_paths(g, [e], templates[t], cap=10_000)
            terms = sorted(set(res.terminals()) - {e})
            if not terms or len(terms) > 50:
                continue
            used.add(e)
            name = g.vocab.entity_name(e)
            out.append(QAExample(f"{prefix}{len(out)}", _question(phrases[t], name), [name],
                                 [g.vocab.entity_name(a) for a in terms]))
        return out

    used: set[int] = set()
    train = sample(n_train, "train-", used)
    test = sample(n_test, "test-", used)
    return TemplateTask(g, train, test, templates, phrases)


EXAMPLE2_TRIPLES = [("Alice", "marry_to", "Bob"), ("Bob", "father_of", "Charlie")]
EXAMPLE2_QUESTION = "Who is the child of Alice"


def example2() -> tuple[KnowledgeGraph, QAExample]:
    """The two-triple marriage/parent toy graph and its question."""
    g = build_graph(EXAMPLE2_TRIPLES)
    return g, QAExample("ex2", EXAMPLE2_QUESTION, ["Alice"], ["Charlie"])
