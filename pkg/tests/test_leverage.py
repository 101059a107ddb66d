import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smkt.errors import AxisError, DegenerateSeriesError, FitError, LengthError, SplitError
from smkt.leverage import (LeverageCurve, average_curves, exponential_fit, fit_curve,
                           return_volatility_correlation, split_periods)
from smkt.synth import LeverageConfig, business_days, generate_leverage_series, generate_regime_series
from smkt.timeseries import NormalizedSeries


def naive_L(x, t):
    x = np.asarray(x, float)
    n = x.size
    num = sum(x[i] * x[i + t] ** 2 for i in range(n - t)) / (n - t)
    m1 = sum(x) / n
    m2 = sum(v * v for v in x) / n
    return (num - m1 * m2) / (m2 * m2)


def test_hand_example():
    # x^2 = [4, 0, 1, 1], <x^2> = 3/2, <x> = 1/2
    c = return_volatility_correlation([2.0, 0.0, -1.0, 1.0], t_max=2)
    np.testing.assert_allclose(c.values, [-13 / 27, 1 / 9], atol=1e-15)
    np.testing.assert_array_equal(c.counts, [3, 2])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_matches_loop_oracle(seed):
    x = np.random.default_rng(seed).standard_t(3, 60)
    c = return_volatility_correlation(x, t_max=7)
    np.testing.assert_allclose(c.values, [naive_L(x, t) for t in range(1, 8)], rtol=1e-10, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_reflection_antisymmetry(seed):
    x = np.random.default_rng(seed).standard_normal(300)
    a = return_volatility_correlation(x, 10).values
    b = return_volatility_correlation(-x, 10).values
    np.testing.assert_allclose(a, -b, atol=1e-12)


def test_iid_rademacher_null():
    n = 100_000
    for seed in range(5):
        x = np.random.default_rng(seed).choice([-1.0, 1.0], n)
        c = return_volatility_correlation(x, 40)
        assert np.all(np.abs(c.values) < 4 / np.sqrt(c.counts))


def test_iid_gaussian_null():
    # Var(r r^2) = 3 for unit Gaussians, so the band widens by sqrt(3)
    n = 100_000
    for seed in range(5):
        x = np.random.default_rng(seed).standard_normal(n)
        c = return_volatility_correlation(x, 40)
        assert np.all(np.abs(c.values) < 4 * np.sqrt(3) / np.sqrt(c.counts))


def test_guards():
    with pytest.raises(LengthError):
        return_volatility_correlation([1.0, 2.0], t_max=2)
    with pytest.raises(LengthError):
        return_volatility_correlation([1.0, 2.0, 3.0], t_max=0)
    with pytest.raises(DegenerateSeriesError):
        return_volatility_correlation(np.zeros(10), 3)


def _curve(values):
    values = np.asarray(values, float)
    lags = np.arange(1, values.size + 1)
    return LeverageCurve(lags, values, np.full(values.size, 1000))


def test_exact_exponential_recovered():
    t = np.arange(1, 41)
    fit = exponential_fit(_curve(-0.5 * np.exp(-t / 10)))
    assert fit.c == pytest.approx(-0.5, abs=1e-6)
    assert fit.tau == pytest.approx(10, abs=1e-6)
    assert fit.status == "ok"
    fit = exponential_fit(_curve(0.2 * np.exp(-t / 3)), window=(2, 20))
    assert (fit.c, fit.tau) == pytest.approx((0.2, 3), abs=1e-6)
    assert fit.window == (2, 20)


def test_degenerate_and_bad_windows():
    fit = exponential_fit(_curve(np.zeros(10)))
    assert fit.status == "degenerate" and np.isnan(fit.tau)
    with pytest.raises(FitError):
        exponential_fit(_curve(np.ones(10)), window=(1, 3))
    with pytest.raises(FitError):
        exponential_fit(_curve(np.ones(10)), window=(0, 8))


def test_flat_curve_flags_unbounded_tau():
    fit = exponential_fit(_curve(np.full(20, -0.1)))
    assert fit.status == "unbounded-tau"
    assert fit.c == pytest.approx(-0.1, rel=1e-3)


def test_noisy_fit_tau_within_30_percent():
    t = np.arange(1, 41)
    hits = 0
    for seed in range(100):
        y = -0.3 * np.exp(-t / 15) + np.random.default_rng(seed).normal(0, 0.01, t.size)
        hits += abs(exponential_fit(_curve(y)).tau / 15 - 1) <= 0.3
    assert hits >= 95


def test_feedback_sign_gives_leverage_sign():
    neg, pos = [], []
    for seed in range(10):
        neg.append(return_volatility_correlation(generate_leverage_series(
            LeverageConfig(50_000, feedback=-0.1, tau=10, seed=seed)), 10).values)
        pos.append(return_volatility_correlation(generate_leverage_series(
            LeverageConfig(50_000, feedback=0.1, tau=10, seed=seed)), 10).values)
    assert np.all(np.mean(neg, 0) < 0)
    assert np.all(np.mean(pos, 0) > 0)


def test_split_periods():
    dates = business_days("1999-12-20", 20)
    s = NormalizedSeries("X", dates, np.random.default_rng(0).standard_normal(20))
    before, after = split_periods(s, "2000-01-01")
    assert before.dates[-1] < np.datetime64("2000-01-01") <= after.dates[0]
    assert before.values.size + after.values.size == 20
    for part in (before, after):
        assert abs(part.values.mean()) < 1e-12
        assert part.values.var() == pytest.approx(1)
    with pytest.raises(SplitError):
        split_periods(s, "1990-01-01")
    with pytest.raises(SplitError):
        split_periods(s, "2010-01-01")


def test_regime_crossover():
    s = generate_regime_series(LeverageConfig(40_000, feedback=-0.1, seed=1),
                               LeverageConfig(40_000, feedback=0.1, seed=2))
    before, after = split_periods(s, "2000-01-01")
    lb = fit_curve(return_volatility_correlation(before, 40))
    la = fit_curve(return_volatility_correlation(after, 40))
    assert np.all(lb.values[:5] < 0) and np.all(la.values[:5] > 0)
    assert lb.fit.c < 0 < la.fit.c


def test_average_curves():
    a = _curve([1.0, 2.0, 3.0, 4.0])
    b = _curve([3.0, 2.0, 1.0, 0.0])
    avg = average_curves([a, b])
    np.testing.assert_allclose(avg.values, 2.0)
    np.testing.assert_array_equal(avg.counts, 2000)
    with pytest.raises(AxisError):
        average_curves([a, _curve([1.0, 2.0])])
    with pytest.raises(AxisError):
        average_curves([])


def test_rows_carry_fit():
    t = np.arange(1, 11)
    c = fit_curve(_curve(-0.2 * np.exp(-t / 4)))
    rows = list(c.to_rows())
    assert rows[0][0] == 1
    assert rows[0][2] == pytest.approx(-0.2 * np.exp(-0.25), abs=1e-8)
