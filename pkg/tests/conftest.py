"""Shared fixtures plus a terminal-summary hook for the acceptance suite.

Each acceptance test registers a one-line verdict through ``record_criterion``;
the hook prints them after the normal pytest summary so the pass/fail status of
every criterion is visible in one block even under output capture.
"""

import pytest

_CRITERIA: list[tuple[str, bool, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    _CRITERIA.append((name, passed, detail))


@pytest.fixture
def criterion():
    """Hand tests a recorder that also raises on failure."""

    def check(name: str, passed: bool, detail: str = "") -> None:
        record_criterion(name, passed, detail)
        assert passed, f"{name}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        verdict = "PASS" if passed else "FAIL"
        line = f"{verdict}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
