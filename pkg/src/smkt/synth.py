"""Generators for synthetic data with known planted structure.

All generators are deterministic functions of their config and seed.
Innovations are Gaussian unless ``innovations="student-t"`` is requested;
the Gaussian default does not reproduce the power-law return tails of real
markets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .timeseries import NormalizedSeries, ReturnPanel, _standardize


def business_days(start: str, n: int) -> np.ndarray:
    return np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")


def _innovations(rng, shape, kind="gaussian", df=4.0):
    if kind == "gaussian":
        return rng.standard_normal(shape)
    if kind == "student-t":
        # unit variance for df > 2
        return rng.standard_t(df, shape) * np.sqrt((df - 2.0) / df)
    raise ValueError(f"unknown innovation kind {kind!r}")


@dataclass(frozen=True)
class Sector:
    size: int
    loading: float
    signed: bool = True
    name: str | None = None


@dataclass(frozen=True)
class FactorPanelConfig:
    """``r_i = beta_i m + g_i f_s(i) + eps_i``.

    Stocks are assigned to sectors in order; stocks past the last sector
    carry only the market factor. A ``signed`` sector gives its first half
    ``+loading`` and its second half ``-loading``, planting two
    anti-correlated subsectors in that sector's mode.
    """

    N: int
    T: int
    beta: float | tuple = 0.0
    sectors: tuple = ()
    noise: float = 1.0
    seed: int = 0
    innovations: str = "gaussian"
    df: float = 4.0
    start: str = "2003-01-02"

    def __post_init__(self):
        if self.N < 2 or self.T < 2:
            raise DomainError("N and T must be >= 2")
        if sum(s.size for s in self.sectors) > self.N:
            raise DomainError("sector sizes exceed N")
        beta = np.broadcast_to(np.asarray(self.beta, dtype=float), (self.N,))
        if not np.all(np.isfinite(beta)) or not all(np.isfinite(s.loading) for s in self.sectors):
            raise DomainError("loadings must be finite")
        if self.noise < 0:
            raise DomainError("noise must be non-negative")


@dataclass
class GroundTruth:
    sector: list
    sign: list
    loadings: np.ndarray
    sector_names: list = field(default_factory=list)

    def members(self, name, sign=None):
        return [i for i, (s, g) in enumerate(zip(self.sector, self.sign))
                if s == name and (sign is None or g == sign)]

    def to_dict(self, tickers):
        return {
            "sectors": self.sector_names,
            "stocks": [
                {"ticker": t, "sector": s, "sign": g}
                for t, s, g in zip(tickers, self.sector, self.sign)
            ],
        }


def generate_factor_panel(config: FactorPanelConfig, tickers=None):
    """Returns ``(panel, truth)``; rows are normalized."""
    rng = np.random.default_rng(config.seed)
    n, t = config.N, config.T
    beta = np.broadcast_to(np.asarray(config.beta, dtype=float), (n,))
    k = len(config.sectors)
    G = np.zeros((n, k))
    sector = [None] * n
    sign = [0] * n
    names = []
    pos = 0
    for j, sec in enumerate(config.sectors):
        name = sec.name or f"SEC{j}"
        names.append(name)
        idx = np.arange(pos, pos + sec.size)
        g = np.full(sec.size, float(sec.loading))
        if sec.signed:
            g[sec.size // 2:] *= -1.0
        G[idx, j] = g
        for i, gi in zip(idx, g):
            sector[i] = name
            sign[i] = 1 if gi > 0 else (-1 if gi < 0 else 0)
        pos += sec.size

    market = _innovations(rng, t, config.innovations, config.df)
    factors = _innovations(rng, (k, t), config.innovations, config.df)
    eps = _innovations(rng, (n, t), config.innovations, config.df)
    r = beta[:, None] * market[None, :] + G @ factors + config.noise * eps
    if tickers is None:
        tickers = [f"S{i:04d}" for i in range(n)]
    dates = business_days(config.start, t)
    panel = ReturnPanel.from_matrix(r, tickers, dates)
    return panel, GroundTruth(sector, sign, G, names)


@dataclass(frozen=True)
class LeverageConfig:
    T: int
    sigma0: float = 1.0
    feedback: float = 0.0
    tau: float = 10.0
    floor: float = 0.05
    seed: int = 0
    innovations: str = "gaussian"
    df: float = 4.0

    def __post_init__(self):
        if self.T < 2 or self.sigma0 <= 0 or self.tau <= 0 or not 0 < self.floor <= 1:
            raise DomainError("invalid leverage config")


def _leverage_raw(config: LeverageConfig, rng=None) -> np.ndarray:
    """r(t) = sigma(t) eta(t), sigma(t) = sigma0 max(floor, 1 + lambda sum_{t'<t} e^{-(t-t')/tau} r(t'))."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    eta = _innovations(rng, config.T, config.innovations, config.df)
    decay = np.exp(-1.0 / config.tau)
    lam = config.feedback
    s0, fl = config.sigma0, config.floor
    r = np.empty(config.T)
    memory = 0.0
    for t in range(config.T):
        sigma = s0 * max(fl, 1.0 + lam * memory)
        r[t] = sigma * eta[t]
        memory = decay * (memory + r[t])
    return r


def generate_leverage_series(config: LeverageConfig, ticker="IDX:SYN", start="2003-01-02") -> NormalizedSeries:
    r = _leverage_raw(config)
    return NormalizedSeries(ticker, business_days(start, config.T), _standardize(r, ticker))


def generate_regime_series(before: LeverageConfig, after: LeverageConfig, boundary="2000-01-01",
                           ticker="IDX:SYN") -> NormalizedSeries:
    """Two feedback regimes joined at ``boundary``: ``before.T`` business days
    ending just before it and ``after.T`` starting on it.

    The concatenated series is normalized as a whole, like a raw index.
    """
    b = np.busday_offset(np.datetime64(boundary, "D"), 0, roll="forward")
    first = np.busday_offset(b, -before.T, roll="forward")
    dates = np.concatenate([business_days(str(first), before.T), business_days(str(b), after.T)])
    r = np.concatenate([_leverage_raw(before), _leverage_raw(after)])
    return NormalizedSeries(ticker, dates, _standardize(r, ticker))


def generate_pareto_intervals(gamma: float, x_min: float, n: int, seed: int = 0) -> np.ndarray:
    """Inverse-CDF samples of a density proportional to x^-gamma on [x_min, inf)."""
    if not gamma > 1:
        raise DomainError(f"gamma must exceed 1, got {gamma}")
    if n < 1 or x_min <= 0:
        raise DomainError("need n >= 1 and x_min > 0")
    u = np.random.default_rng(seed).random(n)
    # 1 - u lies in (0, 1]
    return x_min * (1.0 - u) ** (-1.0 / (gamma - 1.0))


def generate_volume_series(T: int, seed: int = 0, df: float = 3.0, memory: float = 0.3) -> np.ndarray:
    """Positive synthetic volumes whose log-changes have heavy-tailed,
    clustered magnitudes (a simple multiplicative volatility cascade)."""
    rng = np.random.default_rng(seed)
    logvol = np.empty(T)
    h = 0.0
    for t in range(T):
        h = memory * h + (1.0 - memory) * rng.standard_normal() * 0.5
        logvol[t] = np.exp(h) * rng.standard_t(df)
    return 1e6 * np.exp(np.cumsum(0.3 * logvol - np.mean(0.3 * logvol)))
