import os
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"

_acceptance: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Record a named acceptance result; the line is printed and the test asserts on it."""
    def _record(name: str, passed: bool, detail: str = ""):
        _acceptance.append((name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _acceptance:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def spal_path():
    p = Path(os.environ.get("BLOCKSKETCH_SPAL004", DATA / "spal_004.mtx"))
    if not p.exists():
        pytest.skip("spal_004.mtx not available (set BLOCKSKETCH_SPAL004)")
    return p
