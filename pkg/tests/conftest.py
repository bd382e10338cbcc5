from importlib import resources
from pathlib import Path

import pytest

from taxoqual.ingest import parse_edge_csv
from taxoqual.model import build_forest
from taxoqual.similarity import LookupBackend

DATA = Path(str(resources.files("taxoqual") / "data"))

SIX_LEAF_EDGES = [
    ("d1", "R", None, "R"),
    ("d1", "I1", "R", "I1"),
    ("d1", "I2", "R", "I2"),
    ("d1", "I3", "I2", "I3"),
    ("d1", "A", "I1", "A"),
    ("d1", "B", "I1", "B"),
    ("d1", "C", "I2", "C"),
    ("d1", "D", "I3", "D"),
    ("d1", "E", "I3", "E"),
    ("d1", "F", "I3", "F"),
]

SIX_LEAF_SIMS = {
    ("A", "B"): 0.8,
    ("D", "E"): 0.9,
    ("D", "F"): 0.7,
    ("E", "F"): 0.6,
    ("A", "D"): 0.85,
    ("B", "E"): 0.65,
}


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def six_leaf():
    return build_forest(SIX_LEAF_EDGES, name="six_leaf")


@pytest.fixture
def six_leaf_backend():
    return LookupBackend(SIX_LEAF_SIMS, default=0.1)


@pytest.fixture
def euct():
    edges, _ = parse_edge_csv((DATA / "euct_shape.csv").read_bytes())
    return build_forest(edges, name="EUCT")


_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.skipped):
        marker = getattr(report, "acceptance", None)
        if marker is not None:
            outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
            _acceptance.append((marker, outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        report.acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    seen = {}
    for (num, title), outcome in _acceptance:
        prev = seen.get((num, title))
        # a criterion fails if any of its checks fails
        if prev is None or outcome == "FAIL" or (prev == "SKIP" and outcome == "PASS"):
            seen[(num, title)] = outcome
    for (num, title), outcome in sorted(seen.items()):
        terminalreporter.write_line(f"[{outcome}] AC-{num:02d} {title}")
