"""Quarter arithmetic and a gap-aware quarterly time series."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

_QUARTER_RE = re.compile(r"^\s*(\d{4})\s*-?\s*Q([1-4])\s*$", re.IGNORECASE)


@dataclass(frozen=True, order=True)
class Quarter:
    year: int
    q: int

    def __post_init__(self):
        if not 1 <= self.q <= 4:
            raise ValueError(f"quarter number must be in 1..4, got {self.q}")

    def __str__(self) -> str:
        return f"{self.year}Q{self.q}"

    @classmethod
    def parse(cls, text: str) -> "Quarter":
        m = _QUARTER_RE.match(text)
        if m is None:
            raise ValueError(f"not a quarter: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def index(self) -> int:
        return self.year * 4 + self.q - 1

    @classmethod
    def from_index(cls, index: int) -> "Quarter":
        return cls(index // 4, index % 4 + 1)

    def succ(self) -> "Quarter":
        return Quarter.from_index(self.index + 1)

    def pred(self) -> "Quarter":
        return Quarter.from_index(self.index - 1)

    @staticmethod
    def span(start: "Quarter", end: "Quarter") -> list["Quarter"]:
        """All quarters from ``start`` to ``end`` inclusive."""
        return [Quarter.from_index(i) for i in range(start.index, end.index + 1)]


def to_quarter(created_utc: int | float) -> Quarter:
    """Calendar quarter (UTC) of an epoch timestamp."""
    if created_utc <= 0:
        raise ValueError("created_utc must be positive")
    dt = datetime.fromtimestamp(created_utc, tz=timezone.utc)
    return Quarter(dt.year, (dt.month - 1) // 3 + 1)


DEFAULT_WINDOW = (Quarter(2014, 1), Quarter(2022, 2))


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Values aligned to strictly increasing quarters; NaN marks a gap."""

    quarters: tuple[Quarter, ...]
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        quarters = tuple(self.quarters)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(quarters) != len(values):
            raise ValueError(f"{len(quarters)} quarters but {len(values)} values")
        for a, b in zip(quarters, quarters[1:]):
            if not a < b:
                raise ValueError(f"quarters not strictly increasing at {a}, {b}")
        object.__setattr__(self, "quarters", quarters)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Quarter, float | None]], name: str = "") -> "TimeSeries":
        pairs = sorted(pairs)
        values = [math.nan if v is None else float(v) for _, v in pairs]
        return cls(tuple(q for q, _ in pairs), np.array(values), name)

    def __len__(self) -> int:
        return len(self.quarters)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.quarters == other.quarters and np.array_equal(self.values, other.values, equal_nan=True)

    def as_dict(self) -> dict[Quarter, float]:
        return {q: float(v) for q, v in zip(self.quarters, self.values) if not math.isnan(v)}

    @property
    def gaps(self) -> list[Quarter]:
        return [q for q, v in zip(self.quarters, self.values) if math.isnan(v)]

    def defined(self) -> "TimeSeries":
        mask = ~np.isnan(self.values)
        return TimeSeries(tuple(q for q, m in zip(self.quarters, mask) if m), self.values[mask], self.name)

    def window(self, start: Quarter | None = None, end: Quarter | None = None) -> "TimeSeries":
        keep = [
            i for i, q in enumerate(self.quarters)
            if (start is None or q >= start) and (end is None or q <= end)
        ]
        return TimeSeries(tuple(self.quarters[i] for i in keep), self.values[keep], self.name)

    def scaled(self, c: float) -> "TimeSeries":
        return TimeSeries(self.quarters, self.values * c, self.name)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["quarter", "value"])
            for q, v in zip(self.quarters, self.values):
                writer.writerow([str(q), "" if math.isnan(v) else repr(float(v))])

    @classmethod
    def from_csv(cls, path, name: str = "") -> "TimeSeries":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"quarter", "value"} <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected header quarter,value")
            pairs = [
                (Quarter.parse(row["quarter"]), float(row["value"]) if row["value"].strip() else None)
                for row in reader
            ]
        return cls.from_pairs(pairs, name)


def align(x: TimeSeries, y: TimeSeries) -> tuple[list[Quarter], np.ndarray, np.ndarray]:
    """Shared quarters where both series are defined, with their values."""
    ydict = dict(zip(y.quarters, y.values))
    quarters, xs, ys = [], [], []
    for q, xv in zip(x.quarters, x.values):
        yv = ydict.get(q, math.nan)
        if math.isnan(xv) or math.isnan(yv):
            continue
        quarters.append(q)
        xs.append(xv)
        ys.append(yv)
    return quarters, np.array(xs, dtype=float), np.array(ys, dtype=float)


def as_array(x: TimeSeries | Sequence[float] | np.ndarray) -> np.ndarray:
    if isinstance(x, TimeSeries):
        return x.values
    return np.asarray(x, dtype=float).reshape(-1)
