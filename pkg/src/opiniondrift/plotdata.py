"""CSV tables behind the stance and proportion figures, plus optional SVG.

The CSVs are the contract.  SVG rendering only ever reads a CSV back, so a
chart is a pure function of its table.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .counterfactual import Mode, ScenarioSpec, effective_weights, has_absences
from .panel import Panel, TimeAverages, time_averages
from .timeseries import TimeSeries


def _fmt(v: float) -> str:
    return "" if v is None or math.isnan(v) else repr(float(v))


def write_series_table(path, series: Mapping[str, TimeSeries]) -> None:
    """Wide table: one row per quarter, one column per series."""
    quarters = sorted({q for s in series.values() for q in s.quarters})
    lookup = {name: dict(zip(s.quarters, s.values)) for name, s in series.items()}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["quarter", *series])
        for q in quarters:
            writer.writerow([str(q), *(_fmt(lookup[name].get(q, math.nan)) for name in series)])


def write_group_table(path, panel: Panel, quantity: str) -> None:
    """Wide per-group table of ``proportion`` or ``mean_stance``."""
    data = {"proportion": panel.proportions, "mean_stance": panel.mean_stance}[quantity]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["quarter", *panel.groups])
        for t, q in enumerate(panel.quarters):
            writer.writerow([str(q), *(_fmt(v) for v in data[t])])


def write_scenario_grid(
    path,
    panel: Panel,
    rows: Mapping[str, TimeSeries],
    renormalize: bool | None = None,
    averages: TimeAverages | None = None,
) -> None:
    """Long table for the actual / proportion-only / stance-only grid.

    Columns: row, quarter, group, proportion, stance, overall.  Per row,
    ``proportion`` and ``stance`` are the per-group inputs that scenario
    actually used and ``overall`` is its series value.
    """
    averages = averages or time_averages(panel)
    if renormalize is None:
        renormalize = has_absences(panel)
    groups = panel.groups
    inputs = {
        "actual": (panel.proportions, panel.mean_stance),
        "proportion_only": (
            panel.proportions,
            np.broadcast_to(averages.lbar, panel.weight.shape),
        ),
        "stance_only": (
            effective_weights(panel, ScenarioSpec.uniform(groups, Mode.STANCE_ONLY, renormalize), averages),
            panel.mean_stance,
        ),
    }
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "quarter", "group", "proportion", "stance", "overall"])
        for row, series in rows.items():
            props, stances = inputs[row]
            values = dict(zip(series.quarters, series.values))
            for t, q in enumerate(panel.quarters):
                for g, group in enumerate(groups):
                    stance = stances[t, g] if panel.present[t, g] or row == "proportion_only" else math.nan
                    writer.writerow([row, str(q), group, _fmt(props[t, g]), _fmt(stance), _fmt(values.get(q, math.nan))])


# -- SVG --------------------------------------------------------------------

_PALETTE = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"]
_W, _H, _PAD = 640, 320, 40


def _read_wide(path) -> tuple[list[str], list[str], list[list[float]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        quarters, cols = [], [[] for _ in header[1:]]
        for row in reader:
            quarters.append(row[0])
            for j, cell in enumerate(row[1:]):
                cols[j].append(float(cell) if cell.strip() else math.nan)
    return header[1:], quarters, cols


def polyline_segments(values: Sequence[float]) -> list[list[int]]:
    """Index runs between gaps; a gap always breaks the line."""
    runs, cur = [], []
    for i, v in enumerate(values):
        if math.isnan(v):
            if cur:
                runs.append(cur)
            cur = []
        else:
            cur.append(i)
    if cur:
        runs.append(cur)
    return runs


def svg_lines(csv_path, ymin: float = -1.0, ymax: float = 1.0) -> str:
    names, quarters, cols = _read_wide(csv_path)
    n = max(len(quarters), 1)

    def x(i):
        return _PAD + (i + 0.5) * (_W - 2 * _PAD) / n

    def y(v):
        return _H - _PAD - (v - ymin) / (ymax - ymin) * (_H - 2 * _PAD)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">']
    parts.append(f'<line x1="{_PAD}" y1="{y(0):.3f}" x2="{_W - _PAD}" y2="{y(0):.3f}" stroke="#ccc"/>')
    for k, (name, col) in enumerate(zip(names, cols)):
        color = _PALETTE[k % len(_PALETTE)]
        for run in polyline_segments(col):
            pts = " ".join(f"{x(i):.3f},{y(col[i]):.3f}" for i in run)
            parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"><title>{escape(name)}</title></polyline>')
    for i, q in enumerate(quarters):
        if q.endswith("Q1"):
            parts.append(f'<text x="{x(i):.3f}" y="{_H - 10}" font-size="9">{escape(q[:4])}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def svg_stacked(csv_path) -> str:
    names, quarters, cols = _read_wide(csv_path)
    n = max(len(quarters), 1)
    bw = (_W - 2 * _PAD) / n
    full = _H - 2 * _PAD
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">']
    for i in range(len(quarters)):
        top = _H - _PAD
        for k, col in enumerate(cols):
            v = col[i]
            if math.isnan(v) or v <= 0:
                continue
            h = v * full
            top -= h
            parts.append(
                f'<rect x="{_PAD + i * bw:.3f}" y="{top:.3f}" width="{bw * 0.9:.3f}" height="{h:.3f}" '
                f'fill="{_PALETTE[k % len(_PALETTE)]}"><title>{escape(names[k])}</title></rect>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(csv_path, kind: str = "lines") -> Path:
    out = Path(csv_path).with_suffix(".svg")
    out.write_text(svg_lines(csv_path) if kind == "lines" else svg_stacked(csv_path), encoding="utf-8")
    return out
