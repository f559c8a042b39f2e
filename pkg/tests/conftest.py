"""Shared test plumbing: acceptance results are collected here and printed once."""

import re

import pytest

ACCEPTANCE: dict[str, tuple[str, str]] = {}


@pytest.fixture
def record():
    """record(criterion, passed, detail) stores one acceptance line."""

    def _record(criterion: str, passed, detail: str = ""):
        status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        ACCEPTANCE[criterion] = (status, detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    def order(name):
        number = re.match(r"\d+", name).group()
        return int(number), name[len(number):]

    for name in sorted(ACCEPTANCE, key=order):
        status, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"criterion {name}: {status}  {detail}")
