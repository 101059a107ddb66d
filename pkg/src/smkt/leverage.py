"""Return-volatility correlation L(t) and its exponential fit.

    L(t) = [<r(t') |r(t'+t)|^2> - <r><|r|^2>] / <|r|^2>^2

Negative L(t) at positive lags is the leverage effect, positive values the
anti-leverage effect.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import AxisError, DegenerateSeriesError, FitError, LengthError, SplitError
from .timeseries import NormalizedSeries, Series, _standardize

DEFAULT_TMAX = 40
DEFAULT_BOUNDARY = "2000-01-01"
TAU_BOUNDS = (1e-6, 1e6)


@dataclass(frozen=True)
class ExpFit:
    c: float
    tau: float
    residual_norm: float
    window: tuple
    status: str = "ok"

    def __call__(self, t):
        return self.c * np.exp(-np.asarray(t, dtype=float) / self.tau)

    def to_dict(self):
        return {"c": self.c, "tau_L": self.tau, "residual_norm": self.residual_norm,
                "window": list(self.window), "status": self.status}


@dataclass(frozen=True)
class LeverageCurve:
    lags: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    fit: ExpFit | None = None

    def to_rows(self):
        fitted = self.fit(self.lags) if self.fit is not None and self.fit.status == "ok" else None
        for k, t in enumerate(self.lags):
            yield int(t), float(self.values[k]), (float(fitted[k]) if fitted is not None else float("nan"))


def return_volatility_correlation(r, t_max: int = DEFAULT_TMAX) -> LeverageCurve:
    """L(t) for t = 1..t_max, averaging over every valid start t'."""
    x = np.asarray(r.values if isinstance(r, Series) else r, dtype=float)
    if not 1 <= t_max < x.size:
        raise LengthError(f"need 1 <= t_max < len(series); got t_max={t_max}, len={x.size}")
    x2 = x * x
    m2 = x2.mean()
    Z = m2 * m2
    if Z == 0:
        raise DegenerateSeriesError("<|r|^2> is zero")
    L0 = x.mean() * m2
    lags = np.arange(1, t_max + 1)
    values = np.array([(np.mean(x[:-t] * x2[t:]) - L0) / Z for t in lags])
    return LeverageCurve(lags, values, x.size - lags)


def exponential_fit(curve: LeverageCurve, window: tuple | None = None) -> ExpFit:
    """Least-squares fit of L(t) = c exp(-t / tau_L) on lags within ``window``.

    The fit is done on L(t) itself; the sign of c is free.
    """
    lags, vals = curve.lags, curve.values
    lo, hi = window if window is not None else (int(lags[0]), int(lags[-1]))
    mask = (lags >= lo) & (lags <= hi)
    if lo < lags[0] or hi > lags[-1] or mask.sum() < 4:
        raise FitError(f"window {lo}..{hi} must lie within lags {lags[0]}..{lags[-1]} and hold >= 4 points")
    t = lags[mask].astype(float)
    y = vals[mask]
    if np.all(y == 0):
        return ExpFit(0.0, float("nan"), 0.0, (lo, hi), "degenerate")

    # starting point from a log-linear fit on points sharing the majority sign
    sign = np.sign(np.sum(y)) or 1.0
    pos = sign * y > 0
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(t[pos], np.log(sign * y[pos]), 1)
        tau0 = -1.0 / slope if slope < 0 else t[-1]
        c0 = sign * np.exp(icpt)
    else:
        tau0, c0 = (t[-1] - t[0]) / 2 + 1, y[0]
    tau0 = float(np.clip(tau0, 0.1, 1e4))

    def resid(p):
        return p[0] * np.exp(-t / p[1]) - y

    res = least_squares(resid, [c0, tau0], bounds=([-np.inf, TAU_BOUNDS[0]], [np.inf, TAU_BOUNDS[1]]), xtol=1e-15,
                        ftol=1e-15, gtol=1e-15, max_nfev=10000)
    if not res.success:
        raise FitError(f"exponential fit did not converge: {res.message}",
                       trace={"x": res.x.tolist(), "cost": float(res.cost), "nfev": res.nfev})
    c, tau = res.x
    # a tau pinned at its upper bound means the data show no decay
    status = "unbounded-tau" if tau >= 0.999 * TAU_BOUNDS[1] else "ok"
    return ExpFit(float(c), float(tau), float(np.linalg.norm(res.fun)), (lo, hi), status)


def fit_curve(curve: LeverageCurve, window=None) -> LeverageCurve:
    return replace(curve, fit=exponential_fit(curve, window))


def split_periods(series: Series, boundary=DEFAULT_BOUNDARY):
    """Dates before ``boundary`` and from ``boundary`` on, each re-normalized."""
    b = np.datetime64(boundary, "D")
    before = series.dates < b
    if before.all() or not before.any():
        raise SplitError(f"boundary {b} leaves one side empty for {series.ticker} "
                         f"({series.dates[0]}..{series.dates[-1]})")
    out = []
    for m in (before, ~before):
        out.append(NormalizedSeries(series.ticker, series.dates[m], _standardize(series.values[m], series.ticker)))
    return tuple(out)


def average_curves(curves: Sequence[LeverageCurve]) -> LeverageCurve:
    curves = list(curves)
    if not curves:
        raise AxisError("no curves to average")
    lags = curves[0].lags
    for c in curves[1:]:
        if c.lags.shape != lags.shape or np.any(c.lags != lags):
            raise AxisError("curves have different lag axes")
    values = np.mean([c.values for c in curves], axis=0)
    counts = np.sum([c.counts for c in curves], axis=0)
    return LeverageCurve(lags.copy(), values, counts)
