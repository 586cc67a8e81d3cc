import math
import warnings

import numpy as np
import pytest
from conftest import sim_pool
from hypothesis import given, settings
from hypothesis import strategies as st

from blackband.empirics import (
    DAILY_GRID,
    DetrendConfig,
    ReturnPairs,
    build_pairs,
    cubic_stderr_clustered,
    fit_cubic,
    fit_linear,
    long_trend,
    predictability_curve,
    slope_stderr_clustered,
)
from blackband.errors import DataError, DegenerateDesign, InsufficientData, NoWindow, ParameterError
from blackband.model import ProcessParams
from blackband.series import PriceSeries, calendar

CFG = DetrendConfig()


def daily_series(log_prices, symbol="S", start="1970-01-01"):
    n = len(log_prices)
    return PriceSeries(symbol, "daily", calendar(start, n, "daily"), np.asarray(log_prices, float))


def monthly_series(log_prices, symbol="M"):
    n = len(log_prices)
    return PriceSeries(symbol, "monthly", calendar("1900-01-01", n, "monthly"), np.asarray(log_prices, float))


# -- config -------------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(ratio=0.0), dict(ratio=1.5), dict(T=0.0), dict(outlier_cut=-1)])
def test_config_domain(kw):
    with pytest.raises(ParameterError):
        DetrendConfig(**kw)


def test_config_window_must_fit_inside_T():
    with pytest.raises(ParameterError):
        DetrendConfig(T=5.0).check_frequency("daily")  # 1280 * 1.2 / 252 > 5
    DetrendConfig(T=7.0).check_frequency("daily")


def test_tau_gt_rounding():
    assert CFG.tau_gt(10) == 2
    assert CFG.tau_gt(1280) == 256
    with pytest.raises(ParameterError):
        CFG.tau_gt(2)


# -- long_trend ---------------------------------------------------------------------


def test_long_trend_doubling():
    n = 20 * 252
    s = daily_series(np.r_[np.zeros(1), np.full(n, math.log(2))])
    assert long_trend(s, s.dates[-1], 20) == pytest.approx(math.log(2) / 20, abs=1e-15)
    assert long_trend(s, s.dates[-1], 20) == pytest.approx(0.034657, abs=1e-6)


def test_long_trend_constant():
    s = daily_series(np.zeros(21 * 252))
    assert long_trend(s, s.dates[-1]) == 0.0


def test_long_trend_linear_log_price():
    n = 25 * 252
    s = daily_series(0.05 * np.arange(n) / 252)
    for i in (20 * 252, 22 * 252 + 17, n - 1):
        assert long_trend(s, s.dates[i]) == pytest.approx(0.05, rel=1e-12)


def test_long_trend_monthly():
    s = monthly_series(0.03 * np.arange(300) / 12)
    assert long_trend(s, s.dates[-1]) == pytest.approx(0.03, rel=1e-12)


def test_long_trend_uses_last_prior_observation():
    s = daily_series(0.05 * np.arange(21 * 252) / 252)
    i = 20 * 252 + 3
    # A Saturday after dates[i] resolves to dates[i].
    sat = s.dates[i] + np.timedelta64(1, "D")
    while np.is_busday(sat):
        sat += np.timedelta64(1, "D")
    j = int(np.searchsorted(s.dates, sat, side="right")) - 1
    assert long_trend(s, sat) == long_trend(s, s.dates[j])


def test_long_trend_no_window():
    s = daily_series(np.zeros(5 * 252))
    with pytest.raises(NoWindow):
        long_trend(s, s.dates[-1])
    with pytest.raises(NoWindow):
        long_trend(s, np.datetime64("1900-01-01"))
    assert long_trend(s, s.dates[-1], min_history=False) == 0.0


# -- build_pairs --------------------------------------------------------------------


def test_perfect_trend_is_removed():
    s = daily_series(0.05 * np.arange(27 * 252) / 252)
    for tau in (10, 480, 1280):
        p = build_pairs([s], CFG, tau)
        assert len(p) > 0
        assert np.max(np.abs(p.x_raw)) < 1e-12
        assert np.max(np.abs(p.y_raw)) < 1e-12
        assert np.all(p.x == 0) and np.all(p.y == 0)


def test_pair_count_and_manual_values():
    rng = np.random.default_rng(0)
    L = np.cumsum(rng.normal(0, 0.01, 22 * 252))
    s = daily_series(L)
    a, b, nT = 40, 8, 20 * 252
    p = build_pairs([s], CFG, a)
    assert len(p) == L.size - b - nT
    t = nT + 123
    mu = (L[t] - L[t - nT]) / 20
    x = L[t] - L[t - a] - mu * a / 252
    y = L[t + b] - L[t] - mu * b / 252
    assert p.x_raw[123] == pytest.approx(x, abs=1e-15)
    assert p.y_raw[123] == pytest.approx(y, abs=1e-15)
    assert p.mu[123] == pytest.approx(mu, abs=1e-15)
    assert p.dates[123] == s.dates[t]
    assert [r.symbol for r in list(p)[:2]] == ["S", "S"]


def test_short_series_gives_no_pairs():
    p = build_pairs([daily_series(np.zeros(300))], CFG, 10)
    assert len(p) == 0


def test_build_pairs_rejects_mixed_pools():
    with pytest.raises(DataError):
        build_pairs([daily_series(np.zeros(10)), monthly_series(np.zeros(10))], CFG, 10)
    with pytest.raises(DataError):
        build_pairs([], CFG, 10)


def test_normalized_variance_is_one(futures_pool):
    for tau in (10, 320, 1280):
        p = build_pairs(futures_pool[:20], CFG, tau)
        assert abs(p.x.var() - 1.0) < 1e-12
        assert abs(p.y.var() - 1.0) < 1e-12


def test_per_contract_normalization(futures_pool):
    cfg = DetrendConfig(per_contract=True)
    p = build_pairs(futures_pool[:5], cfg, 80)
    pooled = build_pairs(futures_pool[:5], CFG, 80)
    assert np.array_equal(p.x_raw, pooled.x_raw)
    for g in range(5):
        assert abs(p.x[p.groups == g].var() - 1.0) < 1e-12
        assert abs(p.y[p.groups == g].var() - 1.0) < 1e-12


def test_slope_equals_correlation(futures_pool):
    for tau in (20, 640):
        p = build_pairs(futures_pool[:10], CFG, tau)
        fit = fit_linear(p, outlier_cut=math.inf)
        assert abs(fit.slope - np.corrcoef(p.x, p.y)[0, 1]) < 1e-10


def test_causality_under_truncation(futures_pool):
    s = futures_pool[0]
    a = 160
    b = CFG.tau_gt(a)
    full = build_pairs([s], CFG, a)
    for k in (0, 500, len(full) - 1):
        t = full.dates[k]
        cut = int(np.searchsorted(s.dates, t)) + b
        short = s.truncate(s.dates[cut])
        trunc = build_pairs([short], CFG, a)
        j = int(np.searchsorted(trunc.dates, t))
        assert trunc.dates[j] == t
        assert trunc.x_raw[j] == full.x_raw[k]
        assert trunc.y_raw[j] == full.y_raw[k]
        assert trunc.mu[j] == full.mu[k]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.2, 0.2))
def test_adding_a_linear_drift_changes_nothing(seed, drift):
    rng = np.random.default_rng(seed)
    L = np.cumsum(rng.normal(0, 0.01, 21 * 252))
    t = np.arange(L.size) / 252
    p0 = build_pairs([daily_series(L)], CFG, 80)
    p1 = build_pairs([daily_series(L + drift * t)], CFG, 80)
    np.testing.assert_allclose(p1.x_raw, p0.x_raw, atol=1e-11)
    np.testing.assert_allclose(p1.y_raw, p0.y_raw, atol=1e-11)


# -- fits ---------------------------------------------------------------------------


def test_fit_linear_exact_line():
    x = np.linspace(-2, 2, 50)
    fit = fit_linear(ReturnPairs.from_xy(x, 0.5 * x))
    assert fit.slope == pytest.approx(0.5, abs=1e-14)
    assert fit.stderr == pytest.approx(0.0, abs=1e-14)
    assert fit.n_kept == 50


def test_fit_linear_drops_outlier():
    x = np.linspace(-2, 2, 50)
    pairs = ReturnPairs.from_xy(np.r_[x, 10.0], np.r_[0.5 * x, -10.0])
    fit = fit_linear(pairs, 4.0)
    assert fit.slope == pytest.approx(0.5, abs=1e-14)
    assert fit.n_kept == 50


def test_fit_linear_stderr_matches_textbook(rng):
    x = rng.normal(size=400)
    y = 0.2 * x + rng.normal(size=400)
    fit = fit_linear(ReturnPairs.from_xy(x, y), math.inf)
    X = np.column_stack([np.ones_like(x), x])
    beta, res, *_ = np.linalg.lstsq(X, y, rcond=None)
    cov = res[0] / (400 - 2) * np.linalg.inv(X.T @ X)
    assert fit.slope == pytest.approx(beta[1], abs=1e-13)
    assert fit.intercept == pytest.approx(beta[0], abs=1e-13)
    assert fit.stderr == pytest.approx(math.sqrt(cov[1, 1]), rel=1e-10)


def test_fit_linear_insufficient():
    with pytest.raises(InsufficientData):
        fit_linear(ReturnPairs.from_xy(np.arange(9.0) / 9, np.arange(9.0) / 9))
    with pytest.raises(InsufficientData):
        fit_linear(ReturnPairs.from_xy(np.zeros(30), np.arange(30.0) / 30))


def test_fit_cubic_exact_polynomial():
    x = np.linspace(-3, 3, 101)
    y = 0.1 + 0.3 * x - 0.05 * x**2 - 0.02 * x**3
    fit = fit_cubic(ReturnPairs.from_xy(x, y))
    np.testing.assert_allclose(fit.coef, (0.1, 0.3, -0.05, -0.02), atol=1e-10)
    assert max(fit.stderr) < 1e-10


def test_fit_cubic_degenerate_and_insufficient():
    with pytest.raises(DegenerateDesign):
        fit_cubic(ReturnPairs.from_xy(np.full(40, 0.5), np.arange(40.0) / 40))
    with pytest.raises(InsufficientData):
        fit_cubic(ReturnPairs.from_xy(np.arange(19.0) / 19, np.zeros(19)))


def test_cubic_stderr_matches_statsmodels_style_formula(rng):
    x = rng.normal(size=300)
    y = 0.1 * x - 0.05 * x**3 + rng.normal(size=300)
    fit = fit_cubic(ReturnPairs.from_xy(x, y), math.inf)
    X = np.vander(x, 4, increasing=True)
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    r = y - X @ beta
    cov = (r @ r) / (300 - 4) * np.linalg.inv(X.T @ X)
    np.testing.assert_allclose(fit.coef, beta, atol=1e-12)
    np.testing.assert_allclose(fit.stderr, np.sqrt(np.diag(cov)), rtol=1e-8)


def test_clustered_stderr_equals_robust_when_each_point_is_its_own_cluster(rng):
    x = rng.normal(size=200)
    y = 0.3 * x + rng.normal(size=200) * (1 + np.abs(x))
    pairs = ReturnPairs.from_xy(x, y, groups=np.arange(200))
    X = np.column_stack([np.ones_like(x), x])
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    r = y - X @ beta
    bread = np.linalg.inv(X.T @ X)
    hc1 = 200 / 199 * bread @ (X.T * r**2) @ X @ bread
    assert slope_stderr_clustered(pairs, math.inf) == pytest.approx(math.sqrt(hc1[1, 1]), rel=1e-10)


def test_clustered_needs_two_groups():
    x = np.linspace(-1, 1, 30)
    with pytest.raises(InsufficientData):
        slope_stderr_clustered(ReturnPairs.from_xy(x, x))


# -- curves -------------------------------------------------------------------------


def test_constant_series_gives_all_empty_curve():
    s = daily_series(np.zeros(26 * 252))
    with pytest.warns(RuntimeWarning):
        curve = predictability_curve([s], CFG)
    assert curve.all_empty
    assert [e.tau_lt for e in curve.entries] == list(DAILY_GRID)
    assert all(math.isnan(e.slope) for e in curve.entries)


def test_partial_curve_marks_missing_horizons():
    # 21 years of data: long horizons run out of forward room.
    rng = np.random.default_rng(1)
    s = daily_series(np.cumsum(rng.normal(0, 0.01, 20 * 252 + 100)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        curve = predictability_curve([s], CFG)
    status = {e.tau_lt: e.status for e in curve.entries}
    assert status[10] == "ok"
    assert status[640] == status[1280] == "empty"
    for e in curve.nonempty():
        assert e.n_pairs_kept <= e.n_pairs_raw


def test_sign_change_between_320_and_960(futures_pool):
    curve = predictability_curve(futures_pool, CFG)
    s = dict(zip(curve.column("tau_lt"), curve.column("slope")))
    assert s[320] > 0
    assert s[960] < 0
    for e in curve.entries:
        assert e.status == "ok"
        assert e.n_pairs_kept <= e.n_pairs_raw
        assert np.all(np.isfinite(e.cubic)) and np.all(np.isfinite(e.cubic_stderrs))


def test_correlation_signs_at_100_and_1280(futures_pool):
    assert fit_linear(build_pairs(futures_pool, CFG, 100), math.inf).slope > 0
    assert fit_linear(build_pairs(futures_pool, CFG, 1280), math.inf).slope < 0


def test_cubic_linear_term_tracks_slope(futures_pool):
    for tau in (20, 40, 80):
        pairs = build_pairs(futures_pool, CFG, tau)
        lin = fit_linear(pairs)
        cub = fit_cubic(pairs)
        se = cubic_stderr_clustered(pairs)
        assert cub.coef[1] > 0
        assert abs(cub.coef[1] - lin.slope) < math.hypot(se[1], slope_stderr_clustered(pairs))
        assert abs(cub.coef[2]) < 3 * se[2]


def test_pure_ou_slopes_negative():
    p = ProcessParams(0.0, 1 / 2, 10.0, sigma2=0.05)
    pool = sim_pool(p, years=25, n_paths=60, seed=5)
    curve = predictability_curve(pool, CFG)
    assert np.all(curve.column("slope") < 0)


def test_monthly_pool_runs():
    pool = sim_pool(years=40, n_paths=50, seed=2, frequency="monthly")
    cfg = DetrendConfig.for_frequency("monthly")
    curve = predictability_curve(pool, cfg)
    assert curve.frequency == "monthly"
    assert curve.entries[0].tau_lt_years == pytest.approx(5 / 12)
    assert all(e.status == "ok" for e in curve.entries)


def test_curve_deterministic_across_threads(futures_pool):
    pool = futures_pool[:30]
    a = predictability_curve(pool, CFG, threads=1)
    b = predictability_curve(pool, CFG, threads=4)
    c = predictability_curve(pool, CFG, threads=None)
    assert a == b == c
