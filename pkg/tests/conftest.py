import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cqhj import Superposition, preset  # noqa: E402

DATA = Path(__file__).parent / "data" / "oracle_values.json"

# acceptance verdicts, echoed in the terminal summary
VERDICTS = []


@pytest.fixture(scope="session")
def frozen():
    return json.loads(DATA.read_text())


@pytest.fixture(scope="session")
def case1() -> Superposition:
    return preset("case1").superposition()


@pytest.fixture(scope="session")
def case2() -> Superposition:
    return preset("case2").superposition()


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for an acceptance criterion and print it immediately."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(VERDICTS):
            terminalreporter.write_line(line)
