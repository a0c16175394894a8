import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from morseflow import find_critical_points, landscape  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def critsets():
    cache = {}

    def get(name):
        if name not in cache:
            L = landscape(name)
            cache[name] = (L, find_critical_points(L))
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
