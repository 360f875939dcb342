from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_ACCEPTANCE = []


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(name, ok, detail)``."""

    def record(name, ok, detail=""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
