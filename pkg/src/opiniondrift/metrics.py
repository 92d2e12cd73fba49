"""Similarity measures between stance time series.

Pearson correlation (with a two-sided Student-t p-value), Euclidean
distance, dynamic time warping and the summed absolute difference used
as the fit loss for counterfactual scenarios.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .timeseries import TimeSeries, align

_FPMIN = 1e-300
_EPS = 1e-16
_MAXIT = 10_000


class ConstantSeries(ValueError):
    pass


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _log_front(a: float, b: float, x: float) -> float:
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return a * math.log(x) + b * math.log1p(-x) - lbeta


def log_betainc(a: float, b: float, x: float) -> float:
    """Natural log of the regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return -math.inf
    if x == 1.0:
        return 0.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _log_front(a, b, x) + math.log(_betacf(a, b, x)) - math.log(a)
    # complement branch converges faster here
    tail = math.exp(_log_front(b, a, 1.0 - x)) * _betacf(b, a, 1.0 - x) / b
    return math.log1p(-tail)


def betainc(a: float, b: float, x: float) -> float:
    return math.exp(log_betainc(a, b, x))


@dataclass(frozen=True)
class PearsonResult:
    r: float
    p_value: float
    log10_p: float
    n: int


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Values of two series on their shared defined points."""
    if isinstance(x, TimeSeries) and isinstance(y, TimeSeries):
        _, xs, ys = align(x, y)
        return xs, ys
    xs = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=float).reshape(-1)
    ys = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float).reshape(-1)
    if len(xs) != len(ys):
        raise ValueError(f"series lengths differ: {len(xs)} vs {len(ys)}")
    keep = ~(np.isnan(xs) | np.isnan(ys))
    return xs[keep], ys[keep]


def pearson_p_value(r: float, n: int) -> tuple[float, float]:
    """Two-sided p-value of a sample correlation ``r`` over ``n`` points.

    Returns ``(p, log10(p))``.  Uses t = r sqrt((n-2)/(1-r^2)) with n-2
    degrees of freedom, for which p = I_{1-r^2}((n-2)/2, 1/2).
    """
    if n < 3:
        raise ValueError("a p-value needs at least 3 points")
    r = max(-1.0, min(1.0, float(r)))
    x = 1.0 - r * r
    if x <= 0.0:
        return 0.0, -math.inf
    lp = log_betainc((n - 2) / 2.0, 0.5, x)
    lp = min(lp, 0.0)
    return math.exp(lp), lp / math.log(10.0)


def pearson(x, y) -> PearsonResult:
    xs, ys = _pair(x, y)
    n = len(xs)
    if n < 3:
        raise ValueError(f"Pearson correlation needs at least 3 shared points, got {n}")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ConstantSeries("correlation is undefined for a constant series")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    p, log10_p = pearson_p_value(r, n)
    return PearsonResult(r, p, log10_p, n)


def euclidean(x, y) -> float:
    xs, ys = _pair(x, y)
    if len(xs) == 0:
        raise ValueError("no shared points to compare")
    return math.sqrt(float(np.sum((xs - ys) ** 2)))


def l1_loss(x, y) -> float:
    xs, ys = _pair(x, y)
    return float(np.sum(np.abs(xs - ys)))


def dtw(x: TimeSeries | Sequence[float], y: TimeSeries | Sequence[float]) -> float:
    """Dynamic time warping distance with absolute-difference cost.

    Steps are match, insertion and deletion with no window.  Gaps (NaN) are
    rejected; trim or interpolate before calling.
    """
    xs = list(map(float, x.values if isinstance(x, TimeSeries) else x))
    ys = list(map(float, y.values if isinstance(y, TimeSeries) else y))
    if not xs or not ys:
        raise ValueError("dtw needs two nonempty series")
    if any(math.isnan(v) for v in xs + ys):
        raise ValueError("dtw is undefined across gaps")
    m = len(ys)
    inf = math.inf
    prev = [0.0] + [inf] * m
    for xi in xs:
        cur = [inf] * (m + 1)
        for j in range(1, m + 1):
            best = min(prev[j - 1], prev[j], cur[j - 1])
            cur[j] = best + abs(xi - ys[j - 1])
        prev = cur
    return prev[m]


@dataclass(frozen=True)
class SimilarityReport:
    pearson_r: float | None
    p_value: float | None
    log10_p: float | None
    euclidean: float
    dtw: float
    l1_loss: float
    n: int
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def compare(x, y) -> SimilarityReport:
    """All similarity measures on the points both series define."""
    xs, ys = _pair(x, y)
    n = len(xs)
    if n < 2:
        raise ValueError(f"need at least 2 shared points, got {n}")
    r = p = lp = None
    note = ""
    try:
        res = pearson(xs, ys)
        r, p, lp = res.r, res.p_value, res.log10_p
    except ConstantSeries as exc:
        note = str(exc)
    except ValueError as exc:
        note = str(exc)
    return SimilarityReport(r, p, lp, euclidean(xs, ys), dtw(xs, ys), l1_loss(xs, ys), n, note)
