"""Counterfactual stance series and driver ranking.

Every group of a panel is put in one of four modes:

* ``vary_both``        proportion P_t(g) and stance L_t(g) follow the data
* ``proportion_only``  P_t(g) follows the data, stance frozen at its average
* ``stance_only``      proportion frozen at its average, L_t(g) follows the data
* ``fixed``            both frozen at their averages

and the scenario value of quarter t is the sum of the per-group
proportion x stance terms.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metrics import SimilarityReport, compare
from .panel import ContractViolation, Panel, TimeAverages, time_averages
from .timeseries import DEFAULT_WINDOW, Quarter, TimeSeries, align

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    VARY_BOTH = "vary_both"
    PROPORTION_ONLY = "proportion_only"
    STANCE_ONLY = "stance_only"
    FIXED = "fixed"


@dataclass
class ScenarioSpec:
    modes: Mapping[str, Mode]
    renormalize: bool = False
    name: str = ""

    def __post_init__(self):
        self.modes = {g: Mode(m) for g, m in self.modes.items()}

    @classmethod
    def uniform(cls, groups: Iterable[str], mode: Mode | str, renormalize: bool = False, name: str = "") -> "ScenarioSpec":
        return cls({g: Mode(mode) for g in groups}, renormalize, name or Mode(mode).value)

    def check(self, panel: Panel) -> None:
        missing = [g for g in panel.groups if g not in self.modes]
        extra = [g for g in self.modes if g not in panel.groups]
        if missing:
            raise ContractViolation(f"no mode assigned to groups {missing}")
        if extra:
            raise ContractViolation(f"modes given for groups not in the panel: {extra}")


def _mask(panel: Panel, spec: ScenarioSpec, *modes: Mode) -> np.ndarray:
    return np.array([spec.modes[g] in modes for g in panel.groups], dtype=bool)


def effective_weights(panel: Panel, spec: ScenarioSpec, averages: TimeAverages) -> np.ndarray:
    """(T, G) proportions each group carries in the scenario.

    Data-driven proportions for vary_both/proportion_only groups, average
    proportions for stance_only/fixed groups.  With renormalization, groups
    absent in a quarter carry no weight there and each row is rescaled to
    sum to 1 (rows that cannot be rescaled are NaN).
    """
    live = _mask(panel, spec, Mode.VARY_BOTH, Mode.PROPORTION_ONLY)
    props = np.nan_to_num(panel.proportions)
    eff = np.where(live[None, :], props, averages.pbar[None, :])
    if spec.renormalize:
        eff = np.where(live[None, :] | panel.present, eff, 0.0)
        totals = eff.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            eff = eff / totals[:, None]
        eff[totals <= 0] = np.nan
    return eff


def evaluate_scenario(panel: Panel, spec: ScenarioSpec, averages: TimeAverages | None = None) -> TimeSeries:
    """Counterfactual overall stance for each quarter of ``panel``."""
    spec.check(panel)
    if panel.empty:
        return TimeSeries(panel.quarters, np.full(len(panel.quarters), np.nan), spec.name)
    averages = averages or time_averages(panel)
    frozen_stance = _mask(panel, spec, Mode.PROPORTION_ONLY, Mode.FIXED)
    bad = [g for g, f in zip(panel.groups, frozen_stance) if f and g in averages.undefined]
    if bad:
        raise ContractViolation(f"average stance undefined for {bad}; they cannot be held fixed")

    eff = effective_weights(panel, spec, averages)
    stance = np.where(frozen_stance[None, :], np.nan_to_num(averages.lbar)[None, :], panel.mean_stance)
    # data-driven stance terms vanish where the group has no comments
    terms = np.where(frozen_stance[None, :] | panel.present, eff * np.nan_to_num(stance), 0.0)
    values = terms.sum(axis=1)
    if spec.renormalize:
        values[np.isnan(eff).any(axis=1)] = np.nan
    all_fixed = all(spec.modes[g] is Mode.FIXED for g in panel.groups)
    if not (all_fixed and not spec.renormalize):
        values[~panel.active_quarters] = np.nan
    return TimeSeries(panel.quarters, values, spec.name)


def has_absences(panel: Panel) -> bool:
    """True if some group has no comments in some nonempty quarter."""
    active = panel.active_quarters
    return bool((~panel.present[active]).any())


def uniform_scenario(
    panel: Panel,
    mode: Mode | str,
    renormalize: bool | None = None,
    averages: TimeAverages | None = None,
    name: str | None = None,
) -> TimeSeries:
    """All groups in one mode.

    Groups without any comments are kept out of the frozen-stance modes
    (they contribute nothing either way) and logged.  ``renormalize``
    defaults to whether any group is absent in any quarter.
    """
    mode = Mode(mode)
    if panel.empty:
        return TimeSeries(panel.quarters, np.full(len(panel.quarters), np.nan), name or mode.value)
    averages = averages or time_averages(panel)
    if renormalize is None:
        renormalize = has_absences(panel)
    modes = {}
    for g in panel.groups:
        if g in averages.undefined:
            log.warning("group %r has no comments in any quarter; excluded from scenario", g)
            modes[g] = Mode.VARY_BOTH
        else:
            modes[g] = mode
    return evaluate_scenario(panel, ScenarioSpec(modes, renormalize, name or mode.value), averages)


def proportion_only(panel: Panel, renormalize: bool | None = None, averages: TimeAverages | None = None) -> TimeSeries:
    return uniform_scenario(panel, Mode.PROPORTION_ONLY, renormalize, averages, "proportion_only")


def stance_only(panel: Panel, renormalize: bool | None = None, averages: TimeAverages | None = None) -> TimeSeries:
    return uniform_scenario(panel, Mode.STANCE_ONLY, renormalize, averages, "stance_only")


def empirical(panel: Panel) -> TimeSeries:
    return evaluate_scenario(panel, ScenarioSpec.uniform(panel.groups, Mode.VARY_BOTH, name="empirical"))


# -- ranking ----------------------------------------------------------------

class RankMetric(str, enum.Enum):
    L1_LOSS = "l1_loss"
    PEARSON = "pearson_r"
    EUCLIDEAN = "euclidean"
    DTW = "dtw"


@dataclass
class DriverRow:
    scenario: str
    pearson_r: float | None
    p_value: float | None
    log10_p_value: float | None
    euclidean: float
    dtw: float
    l1_loss: float
    n: int
    rank: int = 0
    note: str = ""

    @classmethod
    def from_report(cls, name: str, rep: SimilarityReport) -> "DriverRow":
        return cls(name, rep.pearson_r, rep.p_value, rep.log10_p, rep.euclidean, rep.dtw, rep.l1_loss, rep.n, note=rep.note)


@dataclass
class DriverReport:
    rows: list[DriverRow]
    metric: RankMetric = RankMetric.L1_LOSS
    window: tuple[Quarter, Quarter] | None = None

    def __getitem__(self, name: str) -> DriverRow:
        for row in self.rows:
            if row.scenario == name:
                return row
        raise KeyError(name)

    @property
    def order(self) -> list[str]:
        return [row.scenario for row in sorted(self.rows, key=lambda r: r.rank)]

    def to_json(self) -> str:
        out = []
        for row in sorted(self.rows, key=lambda r: r.rank):
            d = asdict(row)
            for k, v in d.items():
                if isinstance(v, float) and not math.isfinite(v):
                    d[k] = None
            out.append(d)
        return json.dumps(out, indent=2)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")


def _sort_key(metric: RankMetric):
    def key(row: DriverRow):
        if metric is RankMetric.PEARSON:
            v = row.pearson_r
            return (v is None, -(v if v is not None else 0.0), row.scenario)
        return (False, getattr(row, metric.value), row.scenario)
    return key


def rank_drivers(
    empirical: TimeSeries,
    scenarios: Sequence[tuple[str, TimeSeries]],
    metric: RankMetric | str = RankMetric.L1_LOSS,
    window: tuple[Quarter, Quarter] | None = DEFAULT_WINDOW,
) -> DriverReport:
    """Score each scenario against the empirical series and rank them.

    Losses and distances rank ascending, Pearson r descending.  Only
    quarters inside ``window`` where both series are defined are compared;
    scenarios with fewer than 3 such quarters get no correlation.
    """
    metric = RankMetric(metric)
    if window is not None:
        empirical = empirical.window(*window)
    rows = []
    for name, series in scenarios:
        if window is not None:
            series = series.window(*window)
        quarters, xs, ys = align(series, empirical)
        if len(quarters) < 2:
            raise ContractViolation(f"scenario {name!r} shares fewer than 2 quarters with the empirical series")
        rows.append(DriverRow.from_report(name, compare(xs, ys)))
    for rank, row in enumerate(sorted(rows, key=_sort_key(metric)), 1):
        row.rank = rank
    return DriverReport(rows, metric, window)
