import sys
from datetime import date
from pathlib import Path

import pytest

from payroll_panel.core import PayrollRecord, Quarter
from payroll_panel.ingest import canonicalize

DATA = Path(__file__).parent / "data"
sys.path.insert(0, str(Path(__file__).parent))

FIRMS = {
    "fA": ("52", "NY", 1200),
    "fB": ("23", "TX", 40),
    "fC": ("72", "CA", 300),
    "fD": ("31", "OH", 700),
}


def rec(worker, firm, quarter, wages=13000.0, hours=520.0, *, hire=date(2012, 1, 15),
        birth=date(1985, 6, 1), gender="F", naics=None, state=None, size=None):
    """One payroll record; firm attributes default to the FIRMS table."""
    n, s, z = FIRMS.get(firm, ("52", "NY", 100))
    if isinstance(quarter, str):
        quarter = Quarter.parse(quarter)
    return PayrollRecord(
        worker_id=worker, firm_id=firm, quarter=quarter, total_wages=float(wages),
        total_hours=float(hours), hire_date=hire, birth_date=birth, gender=gender,
        naics=naics if naics is not None else n, state=state if state is not None else s,
        firm_size=size if size is not None else z,
    )


def panel_of(records, quarters=None):
    if quarters is not None:
        quarters = [Quarter.parse(q) if isinstance(q, str) else q for q in quarters]
    return canonicalize(records, quarters=quarters)


@pytest.fixture
def data_dir():
    return DATA


# -------------------------------------------------- acceptance verdicts

_VERDICTS = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    number, title = mark.args
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    if call.when == "call" or failed:
        # a criterion split over several tests passes only if every part passes
        previous = _VERDICTS.get(number, (title, True))[1]
        _VERDICTS[number] = (title, previous and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        title, ok = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
