import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import events_from_records, make_event, random_records
from opiniondrift.panel import (
    NONE,
    UNKNOWN,
    AvgMode,
    CohortFacet,
    CohortSource,
    CommentEvent,
    ContractViolation,
    CrossFacet,
    DimensionFacet,
    Panel,
    Stance,
    TopicFacet,
    TopicWeighting,
    assign_cohorts,
    build_panel,
    overall_series,
    read_events,
    time_averages,
)
from opiniondrift.timeseries import Quarter, TimeSeries, to_quarter


def utc(*args):
    return int(datetime(*args, tzinfo=timezone.utc).timestamp())


# -- quarters ---------------------------------------------------------------

def test_to_quarter_examples():
    assert to_quarter(utc(2014, 2, 15)) == Quarter(2014, 1)
    assert to_quarter(1577836800) == Quarter(2020, 1)
    assert to_quarter(utc(2022, 6, 30, 23, 59, 59)) == Quarter(2022, 2)
    assert to_quarter(utc(2022, 7, 1)) == Quarter(2022, 3)
    assert to_quarter(utc(2019, 12, 31, 23, 59, 59)) == Quarter(2019, 4)


@given(st.integers(1, 4_000_000_000))
def test_to_quarter_matches_calendar(ts):
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    q = to_quarter(ts)
    assert q.year == dt.year
    assert {1: 1, 2: 1, 3: 1, 4: 2, 5: 2, 6: 2, 7: 3, 8: 3, 9: 3, 10: 4, 11: 4, 12: 4}[dt.month] == q.q


def test_quarter_order_and_successor():
    assert Quarter(2014, 4).succ() == Quarter(2015, 1)
    assert Quarter(2015, 1).pred() == Quarter(2014, 4)
    assert Quarter(2014, 4) < Quarter(2015, 1)
    assert str(Quarter.parse("2022Q2")) == "2022Q2"
    assert len(Quarter.span(Quarter(2014, 1), Quarter(2022, 2))) == 34
    with pytest.raises(ValueError):
        Quarter(2014, 5)


def test_timeseries_invariants(tmp_path):
    with pytest.raises(ValueError):
        TimeSeries((Quarter(2014, 2), Quarter(2014, 1)), [1, 2])
    with pytest.raises(ValueError):
        TimeSeries((Quarter(2014, 1),), [1, 2])
    ts = TimeSeries((Quarter(2014, 1), Quarter(2014, 2), Quarter(2014, 3)), [0.1, math.nan, 1 / 3])
    ts.to_csv(tmp_path / "s.csv")
    back = TimeSeries.from_csv(tmp_path / "s.csv")
    assert back == ts
    assert back.gaps == [Quarter(2014, 2)]


# -- events and cohorts -----------------------------------------------------

def test_stance_scores():
    assert [s.score for s in (Stance.AGAINST, Stance.NEUTRAL, Stance.SUPPORTIVE)] == [-1, 0, 1]
    assert Stance.parse("supportive") is Stance.SUPPORTIVE
    with pytest.raises(ContractViolation):
        Stance.parse("maybe")


def test_event_topic_limit():
    with pytest.raises(ContractViolation):
        make_event("2015Q1", 1, topics=("a", "b", "c", "d", "e"))


def test_assign_cohorts_examples():
    evs = [
        make_event("2018Q2", 1, author="mapped"),
        make_event("2016Q3", 0, author="fallback"),
        make_event("2019Q1", 1, author="fallback"),
        make_event("2017Q1", -1, author="[deleted]"),
    ]
    out = assign_cohorts(evs, {"mapped": 2012})
    assert (out[0].cohort, out[0].cohort_source) == (2012, CohortSource.MAPPING)
    assert (out[1].cohort, out[1].cohort_source) == (2016, CohortSource.DATASET_FALLBACK)
    assert (out[2].cohort, out[2].cohort_source) == (2016, CohortSource.DATASET_FALLBACK)
    assert out[3].cohort_source is CohortSource.UNKNOWN
    panel = build_panel(out, CohortFacet())
    assert UNKNOWN in panel.groups


@given(st.lists(st.tuples(st.sampled_from("abcde"), st.integers(2014, 2022), st.integers(1, 4)), max_size=30))
def test_cohort_monotonicity(rows):
    evs = [make_event(Quarter(y, q), 0, author=a) for a, y, q in rows]
    for ev in assign_cohorts(evs):
        assert ev.cohort_source is CohortSource.DATASET_FALLBACK
        assert ev.quarter.year >= ev.cohort
        # oracle: min year over that author's events
        assert ev.cohort == min(y for a, y, _ in rows if a == ev.author)


def test_unassigned_cohort_is_contract_violation():
    with pytest.raises(ContractViolation):
        build_panel([make_event("2015Q1", 1)], CohortFacet())


# -- building ---------------------------------------------------------------

def test_symmetric_cancellation():
    p = build_panel([make_event("2015Q1", 1, topics=["x"]), make_event("2015Q1", -1, topics=["x"])], TopicFacet())
    cell = p.cell(Quarter(2015, 1), "x")
    assert cell["mean_stance"] == 0.0 and cell["proportion"] == 1.0 and cell["n"] == 2


def _two_topic_events():
    return [make_event("2015Q1", 1, topics=["T1", "T2"]), make_event("2015Q1", -1, topics=["T1"])]


def test_fractional_weighting():
    p = build_panel(_two_topic_events(), TopicFacet(), TopicWeighting.FRACTIONAL)
    t1, t2 = p.cell(Quarter(2015, 1), "T1"), p.cell(Quarter(2015, 1), "T2")
    assert t1["weight"] == 1.5 and t2["weight"] == 0.5
    assert t1["mean_stance"] == pytest.approx(-1 / 3, abs=1e-15)
    assert t2["mean_stance"] == 1.0
    assert (t1["proportion"], t2["proportion"]) == (0.75, 0.25)


def test_occurrence_weighting():
    p = build_panel(_two_topic_events(), TopicFacet(), "occurrence")
    t1, t2 = p.cell(Quarter(2015, 1), "T1"), p.cell(Quarter(2015, 1), "T2")
    assert (t1["weight"], t1["mean_stance"]) == (2.0, 0.0)
    assert (t2["weight"], t2["mean_stance"]) == (1.0, 1.0)


def test_topicless_events_form_none_group():
    p = build_panel([make_event("2015Q1", 1), make_event("2015Q1", 0, topics=["a"])], TopicFacet())
    assert NONE in p.groups
    assert p.cell(Quarter(2015, 1), NONE)["proportion"] == 0.5


def test_empty_events_give_empty_panel():
    p = build_panel([], TopicFacet())
    assert p.empty and p.groups == () and p.quarters == ()
    with pytest.raises(ContractViolation):
        time_averages(p)


def test_dimension_and_cross_facets():
    facet = DimensionFacet("partisan", {"left": "left-wing", "right": "right-wing"}, ("left-wing", "right-wing"))
    evs = [
        make_event("2015Q1", 1, community="left", cohort=2012),
        make_event("2015Q1", -1, community="right", cohort=2013),
        make_event("2015Q1", 0, community="elsewhere", cohort=2012),
    ]
    p = build_panel(evs, facet)
    assert p.groups == ("left-wing", "right-wing", UNKNOWN)
    cross = build_panel(evs, CrossFacet([facet, CohortFacet()]))
    assert set(cross.groups) == {"left-wing|2012", "right-wing|2013", "Unknown|2012"}
    assert overall_series(cross).values[0] == pytest.approx(overall_series(p).values[0], abs=1e-12)


# -- averages ---------------------------------------------------------------

def test_time_average_examples():
    # group a proportions [0.5, 0.5]
    evs = [make_event("2015Q1", 1, cohort=1), make_event("2015Q1", 0, cohort=2),
           make_event("2015Q2", 1, cohort=1), make_event("2015Q2", -1, cohort=2)]
    avg = time_averages(build_panel(evs, CohortFacet()))
    assert avg["1"][0] == 0.5

    # group "9" only in Q2 with proportion 0.4 and stance 1 -> pbar 0.2, lbar 1
    evs = [make_event("2015Q1", 0, cohort=1)]
    evs += [make_event("2015Q2", 1, cohort=9) for _ in range(2)]
    evs += [make_event("2015Q2", -1, cohort=1) for _ in range(3)]
    avg = time_averages(build_panel(evs, CohortFacet()))
    assert avg["9"] == pytest.approx((0.2, 1.0), abs=1e-15)

    evs = [make_event(q, s, cohort=1) for q, s in (("2015Q1", 1), ("2015Q2", 0), ("2015Q3", -1))]
    assert time_averages(build_panel(evs, CohortFacet()))["1"][1] == 0.0


def test_pooled_averages():
    evs = [make_event("2015Q1", 1, cohort=1)] + [make_event("2015Q2", -1, cohort=1) for _ in range(3)]
    evs += [make_event("2015Q2", 0, cohort=2)]
    p = build_panel(evs, CohortFacet())
    pooled = time_averages(p, AvgMode.POOLED)
    assert pooled["1"] == pytest.approx((4 / 5, -2 / 4))
    quarterly = time_averages(p)
    assert quarterly["1"] == pytest.approx(((1 + 3 / 4) / 2, 0.0))


def test_zero_weight_group_is_reported(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text(
        "quarter,group,weight,proportion,mean_stance,n\n"
        "2015Q1,a,1.0,1.0,0.5,1\n2015Q1,ghost,0.0,0.0,,0\n"
    )
    avg = time_averages(Panel.from_csv(path))
    assert avg.undefined == ("ghost",)
    assert math.isnan(avg["ghost"][1])


# -- overall series ---------------------------------------------------------

def test_overall_series_examples():
    evs = [make_event("2015Q1", s, topics=["a"]) for s in (1, 1, 0, -1)]
    assert overall_series(evs).values[0] == 0.25
    assert overall_series(build_panel(evs, TopicFacet())).values[0] == 0.25
    evs = [make_event(q, 1) for q in ("2015Q1", "2015Q2")]
    assert list(overall_series(evs).values) == [1.0, 1.0]


def test_overall_series_gap():
    evs = [make_event("2015Q1", 1, cohort=1), make_event("2015Q3", -1, cohort=1)]
    s = overall_series(evs)
    assert s.gaps == [Quarter(2015, 2)]
    assert overall_series(build_panel(evs, CohortFacet())).gaps == [Quarter(2015, 2)]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_panel_invariants(seed):
    rng = np.random.default_rng(seed)
    quarters, records = random_records(rng)
    evs = events_from_records(records)
    topics = ["t1", "t2", "t3", "t4"]
    evs = [
        CommentEvent(e.id, e.quarter, e.author, e.community, e.stance,
                     tuple(rng.choice(topics, size=int(rng.integers(0, 4)), replace=False)),
                     e.cohort, e.cohort_source)
        for e in evs
    ]
    cohort = build_panel(evs, CohortFacet(), quarters=quarters)
    topic = build_panel(evs, TopicFacet(), quarters=quarters)
    for p in (cohort, topic):
        sums = np.nansum(p.proportions, axis=1)[p.active_quarters]
        assert np.allclose(sums, 1.0, atol=1e-9, rtol=0)
    direct = overall_series(evs, quarters)
    for p in (cohort, topic):
        assert np.allclose(overall_series(p).values, direct.values, atol=1e-12, rtol=0, equal_nan=True)
    # permutation invariance
    perm = [evs[i] for i in rng.permutation(len(evs))]
    again = build_panel(perm, TopicFacet(), quarters=quarters)
    assert again.groups == topic.groups
    assert np.allclose(again.weight, topic.weight, atol=1e-12, rtol=0)
    assert np.allclose(again.mean_stance, topic.mean_stance, atol=1e-12, rtol=0, equal_nan=True)
    assert np.array_equal(again.count, topic.count)


def test_panel_csv_roundtrip(tmp_path):
    evs = [make_event("2015Q1", 1, topics=["a", "b"]), make_event("2015Q3", -1, topics=["b"])]
    p = build_panel(evs, TopicFacet())
    p.to_csv(tmp_path / "p.csv")
    header = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert header == "quarter,group,weight,proportion,mean_stance,n"
    q = Panel.from_csv(tmp_path / "p.csv")
    assert q.quarters == p.quarters and q.groups == p.groups
    assert np.array_equal(q.weight, p.weight)
    assert np.array_equal(q.mean_stance, p.mean_stance, equal_nan=True)


def test_read_events(tmp_path):
    path = tmp_path / "ev.jsonl"
    path.write_text(
        '{"id": "1", "created_utc": 1577836800, "author": "a", "subreddit": "s", "stance": "against", "topics": ["x"]}\n'
    )
    (ev,) = read_events(path)
    assert ev.quarter == Quarter(2020, 1) and ev.stance is Stance.AGAINST and ev.topics == ("x",)
    path.write_text('{"id": "1", "created_utc": 1577836800, "author": "a", "subreddit": "s", "stance": "meh"}\n')
    with pytest.raises(ContractViolation):
        read_events(path)
