import re
from pathlib import Path

import pytest

from adrplan.benchmarks import load_benchmark

DATA = Path(__file__).parent / "data"
KOSMOS_TLE = DATA / "kosmos1408_synthetic.tle"


@pytest.fixture(scope="session")
def kosmos_tle() -> Path:
    return KOSMOS_TLE


@pytest.fixture(scope="session", params=[2, 3, 4, 6])
def table_instance(request):
    """Instances whose tables are the published ones."""
    return load_benchmark(request.param)


@pytest.fixture(scope="session")
def nt2():
    return load_benchmark(2)


@pytest.fixture(scope="session")
def nt3():
    return load_benchmark(3)


@pytest.fixture(scope="session")
def nt4():
    return load_benchmark(4)


# one summary line per acceptance criterion, plus the figures they report
_CRITERIA: dict[int, str] = {}
_NOTES: list[str] = []


@pytest.fixture()
def report_line():
    return _NOTES.append


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m:
        return
    k = int(m.group(1))
    if report.when == "call" or report.outcome != "passed":
        state = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        if _CRITERIA.get(k) != "FAIL":
            _CRITERIA[k] = state


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {k:2d}: {_CRITERIA[k]}")
    for line in _NOTES:
        terminalreporter.write_line(line)
