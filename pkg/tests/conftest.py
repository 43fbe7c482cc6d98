import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vlmdiag.taskgen import generate_tasks  # noqa: E402

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def gc_tasks():
    return generate_tasks("gc", 40, seed=101)


@pytest.fixture(scope="session")
def sudoku_tasks():
    return generate_tasks("sudoku", 20, seed=202)


@pytest.fixture(scope="session")
def mixed_tasks(gc_tasks, sudoku_tasks):
    return gc_tasks + sudoku_tasks


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str):
        _ACCEPTANCE.append(f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
