"""QA examples and their JSON-lines file format.

Each line is an object with ``id``, ``question``, ``q_entities`` (array of
entity names) and ``answers`` (array of names or free-text answers).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .graph import Vocabulary


class QAFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class QAExample:
    id: str
    question: str
    topic_entities: list[str]
    answers: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"id": self.id, "question": self.question,
                "q_entities": list(self.topic_entities), "answers": list(self.answers)}


def _str_list(obj: dict, key: str, lineno: int) -> list[str]:
    val = obj.get(key)
    if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
        raise QAFormatError(lineno, f"field {key!r} must be an array of strings")
    return list(val)


def parse_qa_lines(lines: Iterable[str]) -> list[QAExample]:
    out = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise QAFormatError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise QAFormatError(lineno, "record must be a JSON object")
        qid = obj.get("id")
        if not isinstance(qid, str) or not qid:
            raise QAFormatError(lineno, "field 'id' must be a non-empty string")
        if qid in seen:
            raise QAFormatError(lineno, f"duplicate id {qid!r}")
        seen.add(qid)
        question = obj.get("question")
        if not isinstance(question, str):
            raise QAFormatError(lineno, "field 'question' must be a string")
        topics = _str_list(obj, "q_entities", lineno)
        if not topics:
            raise QAFormatError(lineno, "field 'q_entities' must not be empty")
        out.append(QAExample(qid, question, topics, _str_list(obj, "answers", lineno)))
    return out


def load_qa(path: str | Path) -> list[QAExample]:
    with open(path, encoding="utf-8") as f:
        return parse_qa_lines(f)


def write_qa(examples: Iterable[QAExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(ex.to_json(), ensure_ascii=False) + "\n")


def resolve(vocab: Vocabulary, names: Iterable[str]) -> tuple[list[int], list[str]]:
    """Split names into (resolved ids, names missing from the graph)."""
    ids, missing = [], []
    for n in names:
        if vocab.has_entity(n):
            ids.append(vocab.entity_id(n))
        else:
            missing.append(n)
    return ids, missing
