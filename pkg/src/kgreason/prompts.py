"""Instruction templates for planning, reasoning and explanation.

Reasoning paths are rendered one per line with :func:`serialize_reasoning_path`.
"""

from __future__ import annotations

from typing import Iterable

PLANNING_TEMPLATE = (
    "Please generate a valid relation path that can be helpful for answering "
    "the following question: {question}"
)

REASONING_TEMPLATE = (
    "Based on the reasoning paths, please answer the given question. Please keep the "
    "answer as simple as possible and return all the possible answers as a list.\n"
    "\n"
    "Reasoning Paths:\n"
    "{paths}\n"
    "\n"
    "Question:\n"
    "{question}"
)

EXPLANATION_TEMPLATE = (
    "Based on the reasoning paths, please answer the given question and explain why.\n"
    "\n"
    "Here are some examples:\n"
    "{examples}\n"
    "\n"
    "Reasoning Paths:\n"
    "{paths}\n"
    "\n"
    "Question:\n"
    "{question}"
)


def planning_prompt(question: str) -> str:
    return PLANNING_TEMPLATE.format(question=question)


def reasoning_prompt(question: str, path_lines: Iterable[str]) -> str:
    return REASONING_TEMPLATE.format(paths="\n".join(path_lines), question=question)


def explanation_prompt(question: str, path_lines: Iterable[str], examples_block: str = "") -> str:
    return EXPLANATION_TEMPLATE.format(examples=examples_block, paths="\n".join(path_lines),
                                       question=question)
