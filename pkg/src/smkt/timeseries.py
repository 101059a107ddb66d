"""Daily series, their normalized log-returns and the aligned return panel.

Moments are population moments (divide by n) throughout, so a normalized
series has mean 0 and ``sqrt(<x^2> - <x>^2) == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import AlignmentError, DegenerateSeriesError, DomainError, LengthError


def _as_dates(dates) -> np.ndarray:
    return np.asarray(dates, dtype="datetime64[D]")


@dataclass(frozen=True)
class Series:
    ticker: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = _as_dates(self.dates)
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise LengthError(f"{self.ticker}: dates and values must be 1-d of equal length")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DomainError(f"{self.ticker}: dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


class DailySeries(Series):
    """Close prices or traded volumes; strictly positive."""

    def __post_init__(self):
        super().__post_init__()
        bad = np.flatnonzero(~(self.values > 0))
        if bad.size:
            raise DomainError(
                f"{self.ticker}: non-positive value {self.values[bad[0]]!r} on {self.dates[bad[0]]}"
            )


class RawReturnSeries(Series):
    pass


class NormalizedSeries(Series):
    pass


class VolatilitySeries(Series):
    pass


def log_returns(series: DailySeries, delta_t: int = 1) -> RawReturnSeries:
    """ln P(t+dt) - ln P(t), stamped with the later date."""
    if int(delta_t) != delta_t or delta_t < 1:
        raise DomainError(f"delta_t must be a positive integer, got {delta_t!r}")
    delta_t = int(delta_t)
    values = np.asarray(series.values, dtype=float)
    bad = np.flatnonzero(~(values > 0))
    if bad.size:
        raise DomainError(
            f"{series.ticker}: non-positive value {values[bad[0]]!r} on {series.dates[bad[0]]}"
        )
    if values.size < delta_t + 1:
        raise LengthError(
            f"{series.ticker}: need at least {delta_t + 1} points for delta_t={delta_t}, got {values.size}"
        )
    logs = np.log(values)
    return RawReturnSeries(series.ticker, series.dates[delta_t:], logs[delta_t:] - logs[:-delta_t])


def volume_returns(series: DailySeries) -> RawReturnSeries:
    return log_returns(series, 1)


def _standardize(values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise LengthError(f"{name}: need at least 2 points to normalize, got {values.size}")
    mean = values.mean()
    centered = values - mean
    sigma = np.sqrt(np.mean(centered * centered))
    # relative floor catches constant series that pick up rounding noise
    if not sigma > 1e-14 * max(1.0, abs(mean)):
        raise DegenerateSeriesError(f"{name}: zero variance (halted or flat series)")
    out = centered / sigma
    # one refinement pass pins mean/std to rounding level
    out -= out.mean()
    out /= np.sqrt(np.mean(out * out))
    return out


def normalize(raw: Series) -> NormalizedSeries:
    """(R - <R>) / sigma with the population standard deviation."""
    return NormalizedSeries(raw.ticker, raw.dates, _standardize(raw.values, raw.ticker))


def volatility(series: Series) -> VolatilitySeries:
    return VolatilitySeries(series.ticker, series.dates, np.abs(series.values))


@dataclass(frozen=True)
class ReturnPanel:
    """N x T matrix of normalized returns on a shared date axis."""

    tickers: tuple
    dates: np.ndarray
    matrix: np.ndarray
    dropped: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        dates = _as_dates(self.dates)
        if matrix.ndim != 2 or matrix.shape != (len(self.tickers), dates.size):
            raise LengthError(
                f"panel matrix shape {matrix.shape} does not match "
                f"{len(self.tickers)} tickers x {dates.size} dates"
            )
        if len(set(self.tickers)) != len(self.tickers):
            raise AlignmentError("duplicate tickers in panel")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "matrix", matrix)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def T(self) -> int:
        return self.matrix.shape[1]

    def index(self, ticker: str) -> int:
        return self.tickers.index(ticker)

    def row(self, ticker: str) -> NormalizedSeries:
        return NormalizedSeries(ticker, self.dates, self.matrix[self.index(ticker)])

    def truncate(self, T: int) -> "ReturnPanel":
        """First T days, rows re-normalized."""
        return ReturnPanel.from_matrix(self.matrix[:, :T], self.tickers, self.dates[:T])

    @classmethod
    def from_matrix(cls, matrix, tickers: Sequence[str] | None = None, dates=None) -> "ReturnPanel":
        matrix = np.asarray(matrix, dtype=float)
        n, t = matrix.shape
        if tickers is None:
            tickers = [f"S{i:04d}" for i in range(n)]
        if dates is None:
            dates = np.datetime64("2000-01-03") + np.arange(t)
        rows = np.vstack([_standardize(row, tk) for row, tk in zip(matrix, tickers)])
        return cls(tuple(tickers), dates, rows)


def align_panel(series: Iterable[Series], policy: str = "intersection") -> ReturnPanel:
    """Stack series on their common dates and re-normalize each row.

    Only the ``"intersection"`` policy is supported; forward-filling would
    fabricate zero returns.
    """
    series = list(series)
    if policy != "intersection":
        raise ValueError(f"unknown alignment policy {policy!r}")
    if len(series) < 2:
        raise AlignmentError("need at least 2 series to build a panel")
    common = reduce(np.intersect1d, (s.dates for s in series))
    if common.size == 0:
        raise AlignmentError(
            "empty date intersection across tickers: " + ", ".join(s.ticker for s in series)
        )
    if common.size < 2:
        offenders = [s.ticker for s in series]
        raise AlignmentError(f"date intersection has a single day; tickers: {', '.join(offenders)}")
    rows = []
    dropped = {}
    for s in series:
        keep = np.isin(s.dates, common)
        dropped[s.ticker] = s.dates[~keep]
        rows.append(_standardize(s.values[keep], s.ticker))
    return ReturnPanel(tuple(s.ticker for s in series), common, np.vstack(rows), dropped)
