import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aerharvest.world import compute_los_table, load_map  # noqa: E402


@pytest.fixture(scope="session")
def manhattan():
    city = load_map("manhattan32")
    return city, compute_los_table(city)


@pytest.fixture(scope="session")
def tiny():
    city = load_map("tiny8")
    return city, compute_los_table(city)


_criteria: dict[int, tuple[str, list[str]]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, title = mark.args
            _criteria.setdefault(number, (title, []))
            item.user_properties.append(("criterion", number))


def pytest_runtest_logreport(report):
    number = dict(report.user_properties).get("criterion")
    if number is None:
        return
    outcomes = _criteria[number][1]
    if report.when == "call" or report.outcome != "passed":
        outcomes.append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, outcomes = _criteria[number]
        if not outcomes:
            status = "NOT RUN"
        elif "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number:2d}: {status:7s} {title}")
