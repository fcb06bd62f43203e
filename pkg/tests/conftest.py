"""Collects one summary line per acceptance criterion and prints them after the run."""

import pytest

_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Call ``verdict(number, passed, detail)`` once per criterion."""

    def record(number: int, passed: bool, detail: str) -> None:
        _LINES.append(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
