import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO = Path(__file__).resolve().parents[1]
_CRITERIA = {}


def record_criterion(number, passed, detail):
    _CRITERIA[number] = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"


@pytest.fixture
def configs():
    return REPO / "configs"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
