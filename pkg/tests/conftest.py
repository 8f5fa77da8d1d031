import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

N_CRITERIA = 7
_CRIT = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")
_seen: dict = {}
_failed: dict = {}
_notes: dict = {}


def _criterion(nodeid):
    m = _CRIT.search(nodeid)
    return int(m.group(1)) if m else None


def pytest_runtest_logreport(report):
    n = _criterion(report.nodeid)
    if n is None:
        return
    if report.when == "call" and not report.skipped:
        _seen[n] = True
    if report.failed:
        _failed.setdefault(n, []).append(report.nodeid.split("::")[-1])


@pytest.fixture
def note(request):
    """Attach a measurement to the criterion's summary line."""
    n = _criterion(request.node.nodeid)

    def add(text):
        _notes.setdefault(n, []).append(text)
    return add


def pytest_terminal_summary(terminalreporter):
    if not _seen and not _failed:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in _failed:
            status = "FAIL"
        elif n in _seen:
            status = "PASS"
        else:
            status = "NOT RUN"
        extra = "; ".join(_notes.get(n, []))
        terminalreporter.write_line(f"criterion {n}: {status}" + (f"  ({extra})" if extra else ""))
