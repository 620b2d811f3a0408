"""Shared fixtures: acceptance-criteria reporting.

Acceptance tests record one PASS/FAIL line per criterion; the lines are
printed immediately (visible with -s or on failure) and repeated in a
dedicated section of the terminal summary so a plain `pytest -v` run shows
them.
"""

import pytest

_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance_report():
    def report(criterion: int, name: str, ok: bool, detail: str = ""):
        status = "PASS" if ok else "FAIL"
        line = f"criterion {criterion:2d} {name}: {status}"
        if detail:
            line += f" ({detail})"
        _acceptance_lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
