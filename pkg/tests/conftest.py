import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(tag, ok, detail):
        ACCEPTANCE_LINES.append(f"{tag:<5} {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
