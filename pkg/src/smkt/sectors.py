"""Sign-split subsectors of deviating eigenmodes and their anti-correlation.

A mode's components with ``u_i >= u_c`` form the positive subsector and
those with ``u_i <= -u_c`` the negative one. Each side is combined into a
single return series weighted by the eigenvector components, and the
time-averaged product of the two combinations is compared against the same
quantity for randomly placed combinations.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import SamplingError, UndefinedResult, UnknownTickerError
from .rmt import CorrelationSpectrum
from .timeseries import ReturnPanel

DEFAULT_UC = 0.08
LOW_CORRELATION_UC = 0.06
UC_GRID = (0.06, 0.08, 0.10, 0.12)
IDENTIFICATION_FLOOR = 0.40
NULL_LABEL = "Null"
UNLABELED = "unlabeled"


@dataclass(frozen=True)
class SubsectorPartition:
    alpha: int
    u_c_plus: float
    u_c_minus: float
    positive: dict
    negative: dict
    status: str = "ok"
    degenerate: bool = False
    positive_label: tuple | None = None
    negative_label: tuple | None = None

    @property
    def u_c(self):
        return self.u_c_plus

    def side(self, sign: str) -> dict:
        return self.positive if sign == "+" else self.negative

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "u_c_plus": self.u_c_plus,
            "u_c_minus": self.u_c_minus,
            "positive": self.positive,
            "negative": self.negative,
            "status": self.status,
            "basis_dependent": self.degenerate,
            "positive_label": self.positive_label,
            "negative_label": self.negative_label,
        }


def select_subsectors(
    spectrum: CorrelationSpectrum,
    alpha: int,
    u_c: float = DEFAULT_UC,
    tickers: Sequence[str] | None = None,
    u_c_minus: float | None = None,
    labels: Mapping[str, str] | None = None,
    allow_market_mode: bool = False,
    floor: float = IDENTIFICATION_FLOOR,
) -> SubsectorPartition:
    """Threshold eigenvector ``alpha`` into positive and negative members.

    ``u_c_minus`` defaults to ``u_c`` (symmetric thresholds ``+-u_c``). The
    market mode ``alpha=0`` is refused unless ``allow_market_mode`` is set.
    """
    n = spectrum.N
    if not 0 <= alpha < n:
        raise IndexError(f"alpha={alpha} out of range for N={n}")
    if alpha == 0 and not allow_market_mode:
        raise ValueError("mode 0 is the market mode; pass allow_market_mode=True to partition it")
    u_c_minus = u_c if u_c_minus is None else u_c_minus
    if not (u_c > 0 and u_c_minus > 0):
        raise ValueError("thresholds must be positive")
    if tickers is None:
        tickers = [str(i) for i in range(n)]
    if len(tickers) != n:
        raise ValueError(f"{len(tickers)} tickers for an N={n} spectrum")

    random_level = 1.0 / np.sqrt(n)
    if min(u_c, u_c_minus) < random_level:
        warnings.warn(
            f"threshold {min(u_c, u_c_minus):.3g} is below the random-eigenvector level "
            f"1/sqrt(N) = {random_level:.3g}; subsectors will pick up noise components",
            stacklevel=2,
        )

    u = spectrum.vectors[alpha]
    positive = {tickers[i]: float(u[i]) for i in np.flatnonzero(u >= u_c)}
    negative = {tickers[i]: float(u[i]) for i in np.flatnonzero(u <= -u_c_minus)}
    status = "ok" if (positive or negative) else "empty"
    if status == "empty":
        warnings.warn(f"mode {alpha}: no component reaches the threshold", stacklevel=2)

    pos_label = neg_label = None
    if labels is not None:
        pos_label = label_subsector(positive, labels, floor)
        neg_label = label_subsector(negative, labels, floor)
    return SubsectorPartition(
        alpha, float(u_c), float(u_c_minus), positive, negative, status,
        bool(spectrum.degenerate[alpha]), pos_label, neg_label,
    )


def label_subsector(members, labels: Mapping[str, str], floor: float = IDENTIFICATION_FLOOR):
    """Plurality label of a side and the fraction of members carrying it.

    Ties go to the lexicographically smallest label. When the plurality
    fraction is below ``floor`` the label is reported as ``"Null"``. An empty
    side returns ``(None, nan)``.
    """
    members = list(members)
    if not members:
        return None, float("nan")
    counts = Counter(labels.get(t, UNLABELED) for t in members)
    best = max(counts.values())
    label = min(k for k, v in counts.items() if v == best)
    fraction = best / len(members)
    if fraction < floor:
        label = NULL_LABEL
    return label, fraction


def subsector_return(panel: ReturnPanel, weights: Mapping[str, float]) -> np.ndarray:
    """sum_i w_i r_i(t) over the side's members."""
    index = {t: k for k, t in enumerate(panel.tickers)}
    out = np.zeros(panel.T)
    for ticker, w in weights.items():
        if ticker not in index:
            raise UnknownTickerError(f"ticker {ticker!r} is not in the panel")
        out += w * panel.matrix[index[ticker]]
    return out


def cross_subsector_correlation(i_plus, i_minus) -> float:
    """<I+(t) I-(t)>, no re-normalization."""
    i_plus = np.asarray(i_plus, dtype=float)
    i_minus = np.asarray(i_minus, dtype=float)
    if i_plus.shape != i_minus.shape:
        raise ValueError("combinations must have equal length")
    return float(np.mean(i_plus * i_minus))


@dataclass(frozen=True)
class Baseline:
    mean: float
    stderr: float
    std: float
    samples: np.ndarray = field(repr=False)


def _sample_rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def random_baseline(
    panel: ReturnPanel,
    plus_weights,
    minus_weights,
    n_samples: int = 200,
    seed: int = 0,
    stream: Sequence[int] = (),
) -> Baseline:
    """<I+ I-> for the same weight multisets placed on random disjoint stocks.

    Sample ``k`` draws its placement from a generator seeded by
    ``(seed, *stream, k)``, so results do not depend on evaluation order.
    """
    if n_samples < 30:
        raise SamplingError(f"n_samples must be >= 30, got {n_samples}")
    wp = np.asarray(list(plus_weights), dtype=float)
    wm = np.asarray(list(minus_weights), dtype=float)
    kp, km = wp.size, wm.size
    n = panel.N
    if kp + km > n:
        raise SamplingError(f"side sizes {kp}+{km} exceed N={n}")
    Wp = np.zeros((n_samples, n))
    Wm = np.zeros((n_samples, n))
    for k in range(n_samples):
        perm = _sample_rng(seed, *stream, k).permutation(n)
        Wp[k, perm[:kp]] = wp
        Wm[k, perm[kp:kp + km]] = wm
    r = panel.matrix
    values = np.mean((Wp @ r) * (Wm @ r), axis=1)
    std = float(values.std(ddof=1))
    return Baseline(float(values.mean()), std / np.sqrt(n_samples), std, values)


def relative_difference(c_rand: float, c_real: float) -> float:
    """D = (C_rand - C_real) / (C_rand + C_real)."""
    den = c_rand + c_real
    if den == 0:
        raise UndefinedResult("C_rand + C_real == 0", c_rand=c_rand, c_real=c_real)
    return (c_rand - c_real) / den


@dataclass(frozen=True)
class ModeAntiCorrelation:
    alpha: int
    n_plus: int
    n_minus: int
    c_real: float
    c_rand: float
    c_rand_stderr: float
    c_rand_std: float
    d: float
    d_stderr: float
    status: str = "ok"

    @property
    def z(self) -> float:
        """(C_rand - C_real) in units of the null spread of single combinations."""
        return (self.c_rand - self.c_real) / self.c_rand_std if self.c_rand_std > 0 else float("nan")


@dataclass(frozen=True)
class AntiCorrelationReport:
    u_c: float
    n_samples: int
    seed: int
    orientation: str
    modes: list

    def rows(self):
        return [(m.alpha, m.c_real, m.c_rand, m.c_rand_stderr, m.d) for m in self.modes]

    def to_dict(self):
        return {
            "u_c": self.u_c,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "orientation": self.orientation,
            "modes": [m.__dict__ for m in self.modes],
        }


def _nan_mode(alpha, kp, km, status):
    nan = float("nan")
    return ModeAntiCorrelation(alpha, kp, km, nan, nan, nan, nan, nan, nan, status)


def anti_correlation_scan(
    panel: ReturnPanel,
    spectrum: CorrelationSpectrum,
    u_c: float = DEFAULT_UC,
    alpha_max: int = 60,
    n_samples: int = 200,
    seed: int = 0,
    orientation: str = "magnitude",
) -> AntiCorrelationReport:
    """C_real, random baseline and D for modes 1..alpha_max.

    With ``orientation="magnitude"`` the negative side is combined with
    ``|u_i|`` so both combinations carry positive weights and C values read
    like ordinary correlations; ``"signed"`` uses the raw components. The two
    conventions differ by an overall sign of C_real and C_rand, and D is the
    same in both.

    ``d_stderr`` is the null spread of single random combinations mapped onto
    D at fixed denominator, so ``|D| <= 3 * d_stderr`` is equivalent to
    ``|C_rand - C_real| <= 3 * c_rand_std``.
    """
    if alpha_max >= spectrum.N:
        raise ValueError(f"alpha_max={alpha_max} must be < N={spectrum.N}")
    if orientation not in ("magnitude", "signed"):
        raise ValueError(f"unknown orientation {orientation!r}")
    flip = -1.0 if orientation == "magnitude" else 1.0
    modes = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for alpha in range(1, alpha_max + 1):
            part = select_subsectors(spectrum, alpha, u_c, panel.tickers)
            kp, km = len(part.positive), len(part.negative)
            if kp == 0 or km == 0:
                modes.append(_nan_mode(alpha, kp, km, "empty-side"))
                continue
            wp = part.positive
            wm = {t: flip * w for t, w in part.negative.items()}
            c_real = cross_subsector_correlation(subsector_return(panel, wp), subsector_return(panel, wm))
            base = random_baseline(panel, wp.values(), wm.values(), n_samples, seed, stream=(alpha,))
            den = base.mean + c_real
            if den == 0:
                d, d_se, status = float("nan"), float("nan"), "undefined"
            else:
                d = relative_difference(base.mean, c_real)
                d_se = base.std / abs(den)
                status = "ok"
            modes.append(ModeAntiCorrelation(alpha, kp, km, c_real, base.mean, base.stderr,
                                             base.std, d, d_se, status))
    return AntiCorrelationReport(u_c, n_samples, seed, orientation, modes)


def threshold_sweep(
    spectrum: CorrelationSpectrum,
    tickers: Sequence[str],
    labels: Mapping[str, str] | None = None,
    alphas: Sequence[int] = range(1, 9),
    u_c_grid: Sequence[float] = UC_GRID,
    floor: float = IDENTIFICATION_FLOOR,
) -> list[dict]:
    """Subsector table rows: one per (mode, sign, threshold)."""
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for alpha in alphas:
            if alpha >= spectrum.N:
                break
            for u_c in u_c_grid:
                part = select_subsectors(spectrum, alpha, u_c, tickers, labels=labels or {}, floor=floor)
                for sign, lab in (("+", part.positive_label), ("-", part.negative_label)):
                    members = part.side(sign)
                    rows.append({
                        "alpha": alpha,
                        "sign": sign,
                        "u_c": u_c,
                        "size": len(members),
                        "label": lab[0],
                        "fraction": lab[1],
                        "basis_dependent": part.degenerate,
                    })
    return rows


def match_partition(partition: SubsectorPartition, truth_plus, truth_minus):
    """Precision and recall of a partition against planted sides.

    The eigenvector sign is arbitrary, so the orientation that agrees best
    with the planted sides is used. Returns ``(precision, recall, flipped)``.
    """
    truth_plus, truth_minus = set(truth_plus), set(truth_minus)
    found_plus, found_minus = set(partition.positive), set(partition.negative)

    def score(fp, fm):
        hits = len(fp & truth_plus) + len(fm & truth_minus)
        found = len(fp) + len(fm)
        truth = len(truth_plus) + len(truth_minus)
        return (hits / found if found else 0.0), (hits / truth if truth else 0.0)

    straight = score(found_plus, found_minus)
    flipped = score(found_minus, found_plus)
    if sum(flipped) > sum(straight):
        return flipped[0], flipped[1], True
    return straight[0], straight[1], False
