import re

import pytest

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    """Register a pass/fail line for the acceptance summary, then assert."""

    def _record(key, ok, detail):
        ACCEPTANCE[key] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return _record
