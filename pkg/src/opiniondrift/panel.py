"""Per-quarter, per-group proportion and stance panels.

A panel holds, for every (quarter, group) cell, the group's weight, its
weight-weighted mean stance and its comment count.  Proportions are cell
weight over the quarter's total weight, so the overall stance of a quarter
is the proportion-weighted sum of the group stances.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .timeseries import Quarter, TimeSeries, to_quarter

UNKNOWN = "Unknown"
NONE = "None"
DELETED_AUTHORS = frozenset({"[deleted]", "[removed]", ""})
MAX_TOPICS = 4


class ContractViolation(ValueError):
    """Raised when an input breaks an operation's stated preconditions."""


class Stance(enum.Enum):
    AGAINST = -1
    NEUTRAL = 0
    SUPPORTIVE = 1

    @property
    def score(self) -> int:
        return self.value

    @classmethod
    def parse(cls, value: Any) -> "Stance":
        if isinstance(value, Stance):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                pass
        elif isinstance(value, int) and not isinstance(value, bool) and value in (-1, 0, 1):
            return cls(value)
        raise ContractViolation(f"unknown stance label {value!r}")


class CohortSource(str, enum.Enum):
    MAPPING = "mapping"
    DATASET_FALLBACK = "dataset_fallback"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CommentEvent:
    id: str
    quarter: Quarter
    author: str
    community: str
    stance: Stance
    topics: tuple[str, ...] = ()
    cohort: int | None = None
    cohort_source: CohortSource | None = None

    def __post_init__(self):
        topics = tuple(self.topics)
        if len(topics) > MAX_TOPICS:
            raise ContractViolation(f"event {self.id}: {len(topics)} topics, at most {MAX_TOPICS} allowed")
        if len(set(topics)) != len(topics):
            raise ContractViolation(f"event {self.id}: duplicate topic labels")
        object.__setattr__(self, "topics", topics)
        object.__setattr__(self, "stance", Stance.parse(self.stance))

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "CommentEvent":
        try:
            quarter = to_quarter(int(record["created_utc"]))
            return cls(
                id=str(record["id"]),
                quarter=quarter,
                author=record.get("author") or "",
                community=record["subreddit"],
                stance=Stance.parse(record["stance"]),
                topics=tuple(record.get("topics") or ()),
            )
        except KeyError as exc:
            raise ContractViolation(f"labeled event missing field {exc.args[0]!r}") from None


def read_events(path) -> list[CommentEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                events.append(CommentEvent.from_record(json.loads(line)))
            except (json.JSONDecodeError, ContractViolation, TypeError, ValueError) as exc:
                raise ContractViolation(f"{path}:{lineno}: {exc}") from exc
    return events


def assign_cohorts(
    events: Iterable[CommentEvent], first_activity: Mapping[str, int] | None = None
) -> list[CommentEvent]:
    """Set each event's cohort to the author's first-comment year.

    Authors found in ``first_activity`` use that year.  Otherwise the
    earliest year the author appears in ``events`` is used and the event is
    marked ``dataset_fallback``.  Deleted authors get the Unknown cohort.
    """
    events = list(events)
    first_seen: dict[str, int] = {}
    for ev in events:
        y = ev.quarter.year
        if ev.author not in first_seen or y < first_seen[ev.author]:
            first_seen[ev.author] = y
    first_activity = first_activity or {}
    out = []
    for ev in events:
        if ev.author in DELETED_AUTHORS:
            out.append(replace(ev, cohort=None, cohort_source=CohortSource.UNKNOWN))
        elif ev.author in first_activity:
            out.append(replace(ev, cohort=int(first_activity[ev.author]), cohort_source=CohortSource.MAPPING))
        else:
            out.append(replace(ev, cohort=first_seen[ev.author], cohort_source=CohortSource.DATASET_FALLBACK))
    return out


# -- facets -----------------------------------------------------------------

class TopicWeighting(str, enum.Enum):
    FRACTIONAL = "fractional"
    OCCURRENCE = "occurrence"


def _label_key(label: str):
    special = label in (UNKNOWN, NONE)
    try:
        return (special, 0, int(label), "")
    except ValueError:
        return (special, 1, 0, label)


class TopicFacet:
    name = "topic"

    def memberships(self, ev: CommentEvent, weighting: TopicWeighting) -> list[tuple[str, float]]:
        if not ev.topics:
            return [(NONE, 1.0)]
        w = 1.0 / len(ev.topics) if weighting is TopicWeighting.FRACTIONAL else 1.0
        return [(t, w) for t in ev.topics]

    def sort_key(self, label: str):
        return _label_key(label)


class CohortFacet:
    name = "cohort"

    def memberships(self, ev: CommentEvent, weighting: TopicWeighting) -> list[tuple[str, float]]:
        if ev.cohort_source is None:
            raise ContractViolation(f"event {ev.id} has no cohort assigned; run assign_cohorts first")
        if ev.cohort is None:
            return [(UNKNOWN, 1.0)]
        return [(str(ev.cohort), 1.0)]

    def sort_key(self, label: str):
        return _label_key(label)


@dataclass
class DimensionFacet:
    """Groups events by the social-dimension bin of their community."""

    dimension: str
    community_bins: Mapping[str, str]
    labels: Sequence[str] = ()

    @property
    def name(self) -> str:
        return self.dimension

    def memberships(self, ev: CommentEvent, weighting: TopicWeighting) -> list[tuple[str, float]]:
        return [(self.community_bins.get(ev.community, UNKNOWN), 1.0)]

    def sort_key(self, label: str):
        order = list(self.labels)
        if label in order:
            return (0, order.index(label), "")
        return (1, 0, label)


@dataclass
class CrossFacet:
    """Product of several facets; a group is one label from each part."""

    parts: Sequence[Any]
    sep: str = "|"

    @property
    def name(self) -> str:
        return "x".join(p.name for p in self.parts)

    def memberships(self, ev: CommentEvent, weighting: TopicWeighting) -> list[tuple[str, float]]:
        combos = [("", 1.0)]
        for part in self.parts:
            combos = [
                (f"{lab}{self.sep}{plab}" if lab else plab, w * pw)
                for lab, w in combos
                for plab, pw in part.memberships(ev, weighting)
            ]
        return combos

    def sort_key(self, label: str):
        return tuple(p.sort_key(x) for p, x in zip(self.parts, label.split(self.sep)))


# -- panel ------------------------------------------------------------------

class AvgMode(str, enum.Enum):
    QUARTERLY = "quarterly"
    POOLED = "pooled"


@dataclass(frozen=True, eq=False)
class Panel:
    """Aggregated (quarter x group) cells.

    ``weight`` and ``count`` are (T, G) arrays; ``mean_stance`` is NaN where
    the cell weight is zero.
    """

    facet: str
    quarters: tuple[Quarter, ...]
    groups: tuple[str, ...]
    weight: np.ndarray
    mean_stance: np.ndarray
    count: np.ndarray
    avg_mode: AvgMode = AvgMode.QUARTERLY

    def __post_init__(self):
        shape = (len(self.quarters), len(self.groups))
        for name in ("weight", "mean_stance", "count"):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
        if np.any(self.weight < 0):
            raise ValueError("negative cell weight")

    @property
    def totals(self) -> np.ndarray:
        return self.weight.sum(axis=1)

    @property
    def present(self) -> np.ndarray:
        return self.weight > 0

    @property
    def active_quarters(self) -> np.ndarray:
        """Mask of quarters holding any weight."""
        return self.totals > 0

    @property
    def proportions(self) -> np.ndarray:
        totals = self.totals
        with np.errstate(invalid="ignore", divide="ignore"):
            props = self.weight / totals[:, None]
        props[totals == 0] = np.nan
        return props

    @property
    def empty(self) -> bool:
        return len(self.quarters) == 0 or not self.active_quarters.any()

    def group_index(self, group: str) -> int:
        return self.groups.index(group)

    def cell(self, quarter: Quarter, group: str) -> dict[str, float]:
        t, g = self.quarters.index(quarter), self.groups.index(group)
        return {
            "weight": float(self.weight[t, g]),
            "proportion": float(self.proportions[t, g]),
            "mean_stance": float(self.mean_stance[t, g]),
            "n": int(self.count[t, g]),
        }

    def stance_series(self, group: str) -> TimeSeries:
        return TimeSeries(self.quarters, self.mean_stance[:, self.group_index(group)], group)

    def proportion_series(self, group: str) -> TimeSeries:
        return TimeSeries(self.quarters, self.proportions[:, self.group_index(group)], group)

    def to_csv(self, path) -> None:
        props = self.proportions
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["quarter", "group", "weight", "proportion", "mean_stance", "n"])
            for t, q in enumerate(self.quarters):
                for g, group in enumerate(self.groups):
                    w = self.weight[t, g]
                    writer.writerow([
                        str(q), group, repr(float(w)),
                        "" if math.isnan(props[t, g]) else repr(float(props[t, g])),
                        "" if w == 0 else repr(float(self.mean_stance[t, g])),
                        int(self.count[t, g]),
                    ])

    @classmethod
    def from_csv(cls, path, facet: str = "", avg_mode: AvgMode = AvgMode.QUARTERLY) -> "Panel":
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            need = {"quarter", "group", "weight", "mean_stance", "n"}
            if reader.fieldnames is None or not need <= set(reader.fieldnames):
                raise ContractViolation(f"{path}: expected header quarter,group,weight,proportion,mean_stance,n")
            for row in reader:
                rows.append(row)
        quarters = sorted({Quarter.parse(r["quarter"]) for r in rows})
        if quarters:
            quarters = Quarter.span(quarters[0], quarters[-1])
        groups = list(dict.fromkeys(r["group"] for r in rows))
        qi = {q: i for i, q in enumerate(quarters)}
        gi = {g: i for i, g in enumerate(groups)}
        shape = (len(quarters), len(groups))
        weight, mean, count = np.zeros(shape), np.full(shape, np.nan), np.zeros(shape, dtype=int)
        for r in rows:
            t, g = qi[Quarter.parse(r["quarter"])], gi[r["group"]]
            weight[t, g] = float(r["weight"])
            count[t, g] = int(r["n"])
            if weight[t, g] > 0:
                mean[t, g] = float(r["mean_stance"])
        return cls(facet, tuple(quarters), tuple(groups), weight, mean, count, AvgMode(avg_mode))


def build_panel(
    events: Iterable[CommentEvent],
    facet,
    topic_weighting: TopicWeighting | str = TopicWeighting.FRACTIONAL,
    quarters: Sequence[Quarter] | None = None,
    avg_mode: AvgMode | str = AvgMode.QUARTERLY,
) -> Panel:
    """Aggregate events into a panel over ``facet``.

    Quarters default to the contiguous span between the first and last
    event; pass ``quarters`` to fix the grid (events outside are ignored).
    """
    weighting = TopicWeighting(topic_weighting)
    weight = defaultdict(float)
    stance_sum = defaultdict(float)
    count = defaultdict(int)
    seen_q = set()
    grid = None if quarters is None else set(quarters)
    for ev in events:
        if grid is not None and ev.quarter not in grid:
            continue
        seen_q.add(ev.quarter)
        for label, w in facet.memberships(ev, weighting):
            key = (ev.quarter, label)
            weight[key] += w
            stance_sum[key] += w * ev.stance.score
            count[key] += 1

    if quarters is not None:
        qs = sorted(quarters)
    elif seen_q:
        qs = Quarter.span(min(seen_q), max(seen_q))
    else:
        qs = []
    groups = sorted({label for _, label in weight}, key=facet.sort_key)
    qi = {q: i for i, q in enumerate(qs)}
    gi = {g: i for i, g in enumerate(groups)}
    shape = (len(qs), len(groups))
    W, M, N = np.zeros(shape), np.full(shape, np.nan), np.zeros(shape, dtype=int)
    for (q, label), w in weight.items():
        t, g = qi[q], gi[label]
        W[t, g] = w
        N[t, g] = count[(q, label)]
        if w > 0:
            M[t, g] = stance_sum[(q, label)] / w
    return Panel(facet.name, tuple(qs), tuple(groups), W, M, N, AvgMode(avg_mode))


@dataclass(frozen=True)
class TimeAverages:
    groups: tuple[str, ...]
    pbar: np.ndarray
    lbar: np.ndarray
    undefined: tuple[str, ...] = field(default=())

    def __getitem__(self, group: str) -> tuple[float, float]:
        g = self.groups.index(group)
        return float(self.pbar[g]), float(self.lbar[g])


def time_averages(panel: Panel, avg_mode: AvgMode | str | None = None) -> TimeAverages:
    """Per-group average proportion and average stance.

    Quarterly mode averages the quarterly proportions over every quarter
    that holds any weight (a missing group counts as 0) and averages the
    group's stance over the quarters where it is present.  Pooled mode uses
    total group weight over total weight and the pooled weighted stance.
    """
    if panel.empty:
        raise ContractViolation("time averages need a nonempty panel")
    mode = AvgMode(avg_mode or panel.avg_mode)
    active = panel.active_quarters
    present = panel.present
    if mode is AvgMode.QUARTERLY:
        pbar = panel.proportions[active].mean(axis=0)
        n_present = present.sum(axis=0)
        stance = np.where(present, panel.mean_stance, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            lbar = stance.sum(axis=0) / n_present
    else:
        wg = panel.weight.sum(axis=0)
        pbar = wg / panel.weight.sum()
        stance = np.where(present, panel.mean_stance * panel.weight, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            lbar = stance.sum(axis=0) / wg
    undefined_mask = ~present.any(axis=0)
    lbar = np.where(undefined_mask, np.nan, lbar)
    undefined = tuple(g for g, u in zip(panel.groups, undefined_mask) if u)
    return TimeAverages(panel.groups, pbar, lbar, undefined)


def overall_series(source: Panel | Iterable[CommentEvent], quarters: Sequence[Quarter] | None = None) -> TimeSeries:
    """Per-quarter mean stance; quarters with no comments are gaps.

    From a panel this is the sum over groups of proportion times stance;
    from raw events it is the plain mean of stance scores.
    """
    if isinstance(source, Panel):
        props = source.proportions
        contrib = np.where(source.present, props * np.nan_to_num(source.mean_stance), 0.0)
        values = contrib.sum(axis=1)
        values[~source.active_quarters] = np.nan
        return TimeSeries(source.quarters, values, "empirical")

    sums: dict[Quarter, float] = defaultdict(float)
    counts: dict[Quarter, int] = defaultdict(int)
    for ev in source:
        sums[ev.quarter] += ev.stance.score
        counts[ev.quarter] += 1
    if quarters is None:
        quarters = Quarter.span(min(counts), max(counts)) if counts else []
    values = [sums[q] / counts[q] if counts.get(q) else math.nan for q in quarters]
    return TimeSeries(tuple(quarters), np.array(values, dtype=float), "empirical")
