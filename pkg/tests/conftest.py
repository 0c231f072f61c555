import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Record the verdict of one acceptance criterion and print it."""

    def record(number, passed, detail=""):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} {detail}")
