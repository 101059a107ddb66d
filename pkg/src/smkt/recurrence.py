"""Recurrence intervals between volatility exceedances and their tail.

Intervals from many stocks are scaled by each stock's own mean interval
before pooling, so that distributions at different thresholds can be
compared on the common variable x = tau / <tau>. The tail of the pooled
distribution is fitted with a continuous power law by maximum likelihood,
with the lower cutoff chosen by minimizing the Kolmogorov-Smirnov distance,
and tested with a semi-parametric bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from .errors import FitError, LengthError, PoolingError
from .timeseries import Series

Q_GRID = (2.0, 3.0, 4.0, 5.0)
BINS_PER_DECADE = 20
MIN_SAMPLES = 50
MIN_TAIL = 50
MIN_TAIL_FRACTION = 0.1


@dataclass(frozen=True)
class IntervalSet:
    q: float
    intervals: np.ndarray
    source: str = ""
    first_time: int | None = None
    low_statistics: bool = False

    def exceedance_times(self) -> np.ndarray:
        if self.first_time is None:
            return np.array([], dtype=int)
        return self.first_time + np.concatenate([[0], np.cumsum(self.intervals)])


def recurrence_intervals(vol, q: float, source: str | None = None) -> IntervalSet:
    """Waiting times between successive days with volatility strictly above q."""
    if not q > 0:
        raise ValueError(f"threshold must be positive, got {q}")
    v = np.asarray(vol.values if isinstance(vol, Series) else vol, dtype=float)
    if v.size == 0:
        raise LengthError("empty volatility series")
    if source is None:
        source = vol.ticker if isinstance(vol, Series) else ""
    times = np.flatnonzero(v > q)
    first = int(times[0]) if times.size else None
    return IntervalSet(float(q), np.diff(times), source, first, times.size < 2)


@dataclass(frozen=True)
class PooledSamples:
    samples: np.ndarray
    means: dict
    sizes: dict


def pool_scaled(sets: Iterable[IntervalSet], min_intervals: int = 2) -> PooledSamples:
    """Divide each set by its own mean interval and concatenate."""
    parts, means, sizes = [], {}, {}
    for k, s in enumerate(sets):
        if s.intervals.size < min_intervals:
            continue
        m = float(s.intervals.mean())
        parts.append(s.intervals / m)
        key = s.source or str(k)
        means[key] = m
        sizes[key] = int(s.intervals.size)
    if not parts:
        raise PoolingError(f"no interval set has >= {min_intervals} intervals")
    return PooledSamples(np.concatenate(parts), means, sizes)


@dataclass(frozen=True)
class LogBinnedDensity:
    edges: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    n: int
    first_bin: int
    bins_per_decade: int

    @property
    def centers(self):
        return np.sqrt(self.edges[:-1] * self.edges[1:])

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def errors(self):
        """Poisson counting error on each density value."""
        return np.sqrt(self.counts) / (self.widths * self.n)

    def bin_index(self):
        return self.first_bin + np.arange(self.counts.size)


def scaled_distribution(samples, bins_per_decade: int = BINS_PER_DECADE,
                        min_samples: int = MIN_SAMPLES) -> LogBinnedDensity:
    """Histogram density on a fixed logarithmic grid 10^(k / bins_per_decade).

    The grid is global, so densities built from different samples share
    bin edges and can be compared bin by bin.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < min_samples:
        raise LengthError(f"need >= {min_samples} samples, got {x.size}")
    if np.any(x <= 0):
        raise ValueError("log binning needs positive samples")
    lx = np.log10(x) * bins_per_decade
    k0 = int(np.floor(lx.min() + 1e-9))
    k1 = int(np.floor(lx.max() + 1e-9)) + 1
    edges = 10.0 ** (np.arange(k0, k1 + 1) / bins_per_decade)
    idx = np.floor(lx + 1e-9).astype(int) - k0
    counts = np.bincount(idx, minlength=k1 - k0).astype(float)
    density = counts / (np.diff(edges) * x.size)
    return LogBinnedDensity(edges, density, counts, x.size, k0, bins_per_decade)


@dataclass(frozen=True)
class CollapseCheck:
    passed: bool
    max_z: float
    z: dict = field(repr=False)


def collapse_check(densities: Sequence[LogBinnedDensity], n_sigma: float = 3.0,
                   min_count: int = 10) -> CollapseCheck:
    """Pairwise bin-wise agreement of densities within counting noise.

    Only bins where both densities hold at least ``min_count`` samples are
    compared.
    """
    z = {}
    for a in range(len(densities)):
        for b in range(a + 1, len(densities)):
            da, db = densities[a], densities[b]
            if da.bins_per_decade != db.bins_per_decade:
                raise ValueError("densities use different binnings")
            ia = dict(zip(da.bin_index(), range(da.counts.size)))
            for k, jb in zip(db.bin_index(), range(db.counts.size)):
                ja = ia.get(k)
                if ja is None or da.counts[ja] < min_count or db.counts[jb] < min_count:
                    continue
                err = np.hypot(da.errors[ja], db.errors[jb])
                z[(a, b, int(k))] = float(abs(da.density[ja] - db.density[jb]) / err)
    max_z = max(z.values()) if z else float("nan")
    return CollapseCheck(bool(z) and max_z <= n_sigma, max_z, z)


# -- power-law tail -----------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    gamma: float
    x_min: float
    ks: float
    n_tail: int
    n: int
    policy: str
    discrete: bool = False

    def to_dict(self):
        return {"gamma": self.gamma, "x_min": self.x_min, "ks": self.ks, "n_tail": self.n_tail,
                "n": self.n, "x_min_policy": self.policy, "discrete": self.discrete}


def _ks_continuous(tail_sorted, gamma, x_min):
    n = tail_sorted.size
    cdf = 1.0 - (tail_sorted / x_min) ** (1.0 - gamma)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def _discrete_gamma(tail, x_min):
    s = np.sum(np.log(tail))
    n = tail.size

    def nll(g):
        return n * np.log(zeta(g, x_min)) + g * s

    # continuous approximation as a bracket centre
    g0 = 1.0 + n / np.sum(np.log(tail / (x_min - 0.5)))
    res = minimize_scalar(nll, bounds=(1.0 + 1e-6, max(2 * g0, 10.0)), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def _ks_discrete(tail_sorted, gamma, x_min):
    vals, counts = np.unique(tail_sorted, return_counts=True)
    n = tail_sorted.size
    emp = np.cumsum(counts) / n
    # P(X <= v) = 1 - zeta(gamma, v + 1) / zeta(gamma, x_min)
    model = 1.0 - zeta(gamma, vals + 1.0) / zeta(gamma, x_min)
    emp_before = np.concatenate([[0.0], emp[:-1]])
    model_before = 1.0 - zeta(gamma, vals) / zeta(gamma, x_min)
    return float(max(np.max(np.abs(emp - model)), np.max(np.abs(emp_before - model_before))))


def _fit_at(x_sorted, start, discrete):
    tail = x_sorted[start:]
    x_min = x_sorted[start]
    if discrete:
        g = _discrete_gamma(tail, x_min)
        return g, _ks_discrete(tail, g, x_min)
    s = np.sum(np.log(tail / x_min))
    if s <= 0:
        return float("nan"), float("inf")
    g = 1.0 + tail.size / s
    return g, _ks_continuous(tail, g, x_min)


def powerlaw_fit(samples, x_min="scan", min_tail: int = MIN_TAIL, discrete: bool = False,
                 max_candidates: int = 200, min_tail_fraction: float = MIN_TAIL_FRACTION) -> PowerLawFit:
    """Maximum-likelihood tail exponent with a fixed or KS-selected cutoff.

    Continuous estimator: gamma = 1 + n / sum(ln(x_i / x_min)) over x_i >= x_min.
    ``x_min="scan"`` tries candidate cutoffs (distinct sample values leaving
    at least ``max(min_tail, min_tail_fraction * n)`` points, thinned to
    ``max_candidates``) and keeps the one with the smallest KS distance.
    Without the fraction floor the scan drifts to a few dozen extreme points,
    where any smooth tail passes as a power law. ``discrete=True`` fits the
    zeta-normalized discrete power law instead, for integer data.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < min_tail:
        raise FitError(f"need at least {min_tail} samples, got {n}")
    if np.any(x <= 0):
        raise FitError("power-law fitting needs positive samples")
    if discrete and np.any(x != np.round(x)):
        raise FitError("discrete fit needs integer samples")

    if x_min == "scan":
        last = n - max(min_tail, int(np.ceil(min_tail_fraction * n)))
        # first index of each distinct value
        starts = np.flatnonzero(np.concatenate([[True], x[1:] != x[:-1]]))
        starts = starts[starts <= last]
        if starts.size > max_candidates:
            pick = np.unique(np.linspace(0, starts.size - 1, max_candidates).round().astype(int))
            starts = starts[pick]
        best = None
        for st in starts:
            g, ks = _fit_at(x, st, discrete)
            if np.isfinite(g) and (best is None or ks < best[1]):
                best = (g, ks, st)
        if best is None:
            raise FitError("no candidate cutoff gave a finite exponent")
        g, ks, st = best
        return PowerLawFit(g, float(x[st]), ks, n - st, n, "scan", discrete)

    x_min = float(x_min)
    st = int(np.searchsorted(x, x_min, side="left"))
    if n - st < min_tail:
        raise FitError(f"only {n - st} samples >= x_min={x_min}; need {min_tail}")
    tail = x[st:]
    if discrete:
        g = _discrete_gamma(tail, x_min)
        ks = _ks_discrete(tail, g, x_min)
    else:
        s = np.sum(np.log(tail / x_min))
        if s <= 0:
            raise FitError("all tail samples equal x_min; exponent undefined")
        g = 1.0 + tail.size / s
        ks = _ks_continuous(tail, g, x_min)
    return PowerLawFit(float(g), x_min, float(ks), tail.size, n, "fixed", discrete)


def _sample_tail(rng, gamma, x_min, size, discrete):
    u = rng.random(size)
    if discrete:
        return np.floor((x_min - 0.5) * (1.0 - u) ** (-1.0 / (gamma - 1.0)) + 0.5)
    return x_min * (1.0 - u) ** (-1.0 / (gamma - 1.0))


def ks_test(samples, gamma: float, x_min: float, n_boot: int = 100, seed: int = 0,
            x_min_policy: str = "fixed", min_tail: int = MIN_TAIL, discrete: bool = False,
            return_distances: bool = False, min_tail_fraction: float = MIN_TAIL_FRACTION):
    """Bootstrap p-value for the power-law hypothesis.

    Each replicate keeps the sample size; a point falls in the tail with the
    observed tail probability and is then drawn from the fitted law, and
    otherwise is resampled from the observed points below ``x_min``. Every
    replicate is refitted with the same cutoff policy, and the p-value is the
    fraction of replicates whose KS distance is at least the observed one.
    Replicate ``k`` is seeded by ``(seed, k)``.
    """
    if n_boot < 100:
        raise ValueError(f"n_boot must be >= 100, got {n_boot}")
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    tail = x[x >= x_min]
    body = x[x < x_min]
    if discrete:
        observed = _ks_discrete(tail, gamma, x_min)
    else:
        observed = _ks_continuous(tail, gamma, x_min)
    p_tail = tail.size / n
    policy = "scan" if x_min_policy == "scan" else x_min

    dists = np.empty(n_boot)
    for k in range(n_boot):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), k]))
        n_t = rng.binomial(n, p_tail) if body.size else n
        rep = np.concatenate([
            _sample_tail(rng, gamma, x_min, n_t, discrete),
            rng.choice(body, n - n_t, replace=True) if n - n_t else np.empty(0),
        ])
        try:
            dists[k] = powerlaw_fit(rep, policy, min(min_tail, n_t), discrete,
                                    min_tail_fraction=min_tail_fraction).ks
        except FitError:
            dists[k] = np.inf
    p = float(np.mean(dists >= observed))
    return (p, observed, dists) if return_distances else p


# -- geometric null -----------------------------------------------------------


def _geometric_ks(intervals):
    k = np.asarray(intervals, dtype=float)
    p = 1.0 / k.mean()
    support = np.arange(1, int(k.max()) + 1)
    emp = np.searchsorted(np.sort(k), support, side="right") / k.size
    model = 1.0 - (1.0 - p) ** support
    return float(np.max(np.abs(emp - model))), p


def geometric_ks_test(intervals, n_boot: int = 200, seed: int = 0):
    """KS distance to the fitted geometric law and its bootstrap p-value.

    The geometric law is the discrete-time form of exponential waiting
    times, the expectation for uncorrelated volatilities. Returns
    ``(ks, p_value, p_hat)``.
    """
    k = np.asarray(intervals)
    if k.size < 2 or np.any(k < 1):
        raise ValueError("need >= 2 positive integer intervals")
    observed, p_hat = _geometric_ks(k)
    if p_hat >= 1.0:
        return observed, 1.0, p_hat
    dists = np.empty(n_boot)
    for b in range(n_boot):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), b]))
        dists[b] = _geometric_ks(rng.geometric(p_hat, k.size))[0]
    return observed, float(np.mean(dists >= observed)), p_hat


@dataclass
class RecurrenceDistribution:
    q: float
    samples: np.ndarray = field(repr=False)
    density: LogBinnedDensity = field(repr=False)
    fit: PowerLawFit | None
    p_value: float | None
    means: dict = field(repr=False, default_factory=dict)

    @property
    def n(self):
        return self.samples.size

    def fit_block(self):
        f = self.fit
        return {
            "q": self.q,
            "gamma": None if f is None else f.gamma,
            "x_min": None if f is None else f.x_min,
            "ks": None if f is None else f.ks,
            "p": self.p_value,
            "n": int(self.n),
            "n_tail": None if f is None else f.n_tail,
        }


def analyze_threshold(vols: Sequence, q: float, n_boot: int = 100, seed: int = 0,
                      bins_per_decade: int = BINS_PER_DECADE, min_tail: int = MIN_TAIL,
                      x_min="scan") -> RecurrenceDistribution:
    """Intervals at threshold q for every series, pooled, binned, fitted and tested."""
    sets = [recurrence_intervals(v, q) for v in vols]
    pooled = pool_scaled(sets)
    dens = scaled_distribution(pooled.samples, bins_per_decade, min_samples=1)
    try:
        fit = powerlaw_fit(pooled.samples, x_min, min_tail)
        p = ks_test(pooled.samples, fit.gamma, fit.x_min, n_boot, seed, fit.policy, min_tail)
    except FitError:
        fit, p = None, None
    return RecurrenceDistribution(float(q), pooled.samples, dens, fit, p, pooled.means)
