import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from opiniondrift.panel import CohortSource, CommentEvent, Stance  # noqa: E402
from opiniondrift.timeseries import Quarter  # noqa: E402

_counter = iter(range(10**9))


def make_event(quarter, stance, *, topics=(), cohort=None, author="alice", community="sub", id=None):
    if isinstance(quarter, str):
        quarter = Quarter.parse(quarter)
    source = None if cohort is None else CohortSource.MAPPING
    return CommentEvent(
        id=id or f"e{next(_counter)}",
        quarter=quarter,
        author=author,
        community=community,
        stance=Stance(stance),
        topics=tuple(topics),
        cohort=cohort,
        cohort_source=source,
    )


def random_records(rng: np.random.Generator, max_groups=5, max_quarters=8, start=Quarter(2014, 1)):
    """Random (quarter, group, stance) triples with random absences."""
    n_groups = int(rng.integers(1, max_groups + 1))
    n_quarters = int(rng.integers(1, max_quarters + 1))
    quarters = Quarter.span(start, Quarter.from_index(start.index + n_quarters - 1))
    records = []
    while not records:
        for q in quarters:
            if rng.random() < 0.1:
                continue  # whole quarter empty
            for g in range(n_groups):
                if rng.random() < 0.35:
                    continue
                for _ in range(int(rng.integers(1, 5))):
                    records.append((q, str(2010 + g), int(rng.integers(-1, 2))))
    return quarters, records


def events_from_records(records):
    return [make_event(q, s, cohort=int(g)) for q, g, s in records]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary -------------------------------------------------------

_acceptance_results: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion of the build")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    number, title = marker.args
    entry = _acceptance_results.setdefault(number, (title, []))
    entry[1].append("PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance_results):
        title, outcomes = _acceptance_results[number]
        status = "PASS" if outcomes and all(o == "PASS" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
