import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kgreason.graph import build_graph  # noqa: E402
from kgreason.synthetic import EXAMPLE2_TRIPLES, example2  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"

DIAMOND = [
    ("Alice", "r1", "X"), ("X", "r3", "Z"),
    ("Alice", "r2", "Y"), ("Y", "r4", "Z"),
]


@pytest.fixture
def ex2():
    return example2()


@pytest.fixture
def ex2_graph():
    return build_graph(EXAMPLE2_TRIPLES)


@pytest.fixture
def diamond():
    return build_graph(DIAMOND)

# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
