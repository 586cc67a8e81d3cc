"""Closed-form analytics for a mean-reverting log-price driven by trending noise.

The de-trended log-price pi(t) follows

    dpi/dt = -kappa * pi + eta,
    <eta(t') eta(t'')> = 2 sigma^2 kappa [delta(t' - t'') + (g/2)(gamma + kappa) exp(-gamma |t' - t''|)]

Everything here is a pure function of its inputs. Rates are per year; use
:func:`ProcessParams.from_horizons` to build parameters from the mixed
year/day conventions in which they are usually quoted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import HorizonTooSmall, NoCrossing, ParameterError

TRADING_DAYS_PER_YEAR = 252
MONTHS_PER_YEAR = 12

#: |gamma - kappa| below this fraction of max(gamma, kappa) uses the analytic limit.
DEGENERACY_RTOL = 1e-8
#: 1 - C(tau) below this makes the slope formula 0/0.
MIN_DECORRELATION = 1e-14

CROSSING_BRACKET = (5 / TRADING_DAYS_PER_YEAR, 20.0)
CROSSING_RTOL = 1e-10


@dataclass(frozen=True)
class ProcessParams:
    """Parameters (g, kappa, gamma, sigma^2) of the trending OU model.

    ``kappa`` and ``gamma`` are rates per year, ``g`` is the dimensionless
    trend strength and ``sigma2`` the variance scale of the log-price.
    """

    g: float
    kappa: float
    gamma: float
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("g", "kappa", "gamma", "sigma2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.g < 0:
            raise ParameterError(f"g must be >= 0, got {self.g!r}")
        if self.kappa <= 0:
            raise ParameterError(f"kappa must be > 0, got {self.kappa!r}")
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma!r}")
        if self.sigma2 <= 0:
            raise ParameterError(f"sigma2 must be > 0, got {self.sigma2!r}")

    @classmethod
    def from_horizons(
        cls,
        g: float,
        kappa_inv_years: float,
        gamma_inv_days: float,
        sigma2: float = 1.0,
    ) -> "ProcessParams":
        """Build from a mean-reversion time in years and a trend time in trading days."""
        if kappa_inv_years <= 0 or gamma_inv_days <= 0:
            raise ParameterError("time scales must be > 0")
        return cls(
            g=g,
            kappa=1.0 / kappa_inv_years,
            gamma=TRADING_DAYS_PER_YEAR / gamma_inv_days,
            sigma2=sigma2,
        )

    @property
    def variance(self) -> float:
        """Stationary variance sigma^2 (1 + g) of pi."""
        return self.sigma2 * (1.0 + self.g)

    def with_sigma2(self, sigma2: float) -> "ProcessParams":
        return replace(self, sigma2=sigma2)

    def as_dict(self) -> dict:
        return {"g": self.g, "kappa": self.kappa, "gamma": self.gamma, "sigma2": self.sigma2}


# Published fits: futures (daily pool) and spot (monthly pool).
FUTURES = ProcessParams.from_horizons(0.22, 16.0, 33.0)
SPOT = ProcessParams.from_horizons(0.33, 8.0, 200.0)
PRESETS = {"futures": FUTURES, "spot": SPOT}


@dataclass(frozen=True)
class HorizonPair:
    """Past horizon ``tau_lt`` and future horizon ``tau_gt``, both in years."""

    tau_lt: float
    tau_gt: float

    def __post_init__(self):
        if not (self.tau_lt > 0 and self.tau_gt > 0):
            raise ParameterError(
                f"horizons must be > 0, got ({self.tau_lt!r}, {self.tau_gt!r})"
            )


@dataclass(frozen=True)
class BandReport:
    sigma2: float
    delta: float
    t_mr: float
    daily_vol: float
    params: ProcessParams = field(repr=False)

    @property
    def annual_vol(self) -> float:
        return self.daily_vol * math.sqrt(TRADING_DAYS_PER_YEAR)

    @property
    def factor(self) -> float:
        """Multiplicative price mis-valuation e^Delta."""
        return math.exp(self.delta)

    def as_dict(self) -> dict:
        return {
            "sigma2": self.sigma2,
            "delta": self.delta,
            "t_mr": self.t_mr,
            "daily_vol": self.daily_vol,
            "annual_vol": self.annual_vol,
            "factor": self.factor,
            "g": self.params.g,
            "kappa": self.params.kappa,
            "gamma": self.params.gamma,
        }


def _is_degenerate(params: ProcessParams) -> bool:
    k, gm = params.kappa, params.gamma
    return abs(gm - k) < DEGENERACY_RTOL * max(gm, k)


def _trend_kernel(params: ProcessParams, u):
    """(gamma e^{-kappa u} - kappa e^{-gamma u}) / (gamma - kappa), with its gamma=kappa limit."""
    k, gm = params.kappa, params.gamma
    if _is_degenerate(params):
        return np.exp(-k * u) * (1.0 + k * u)
    return (gm * np.exp(-k * u) - k * np.exp(-gm * u)) / (gm - k)


def autocorr(params: ProcessParams, u):
    """Autocorrelation C(u) of pi at lag ``u`` (years, scalar or array)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or not np.all(np.isfinite(u_arr)):
        raise ParameterError("lag u must be finite and >= 0")
    g = params.g
    c = np.exp(-params.kappa * u_arr) / (1.0 + g) + g / (1.0 + g) * _trend_kernel(params, u_arr)
    # C(0) is 1 in exact arithmetic; pin it so rounding never leaks through.
    c = np.where(u_arr == 0, 1.0, c)
    return float(c) if c.ndim == 0 else c


def covariance(params: ProcessParams, u):
    """Stationary covariance <pi(t) pi(t+u)> in log-price units squared."""
    return params.variance * autocorr(params, u)


def _slope(c_lt, c_gt, c_sum):
    return (c_lt + c_gt - c_sum - 1.0) / (2.0 * np.sqrt((1.0 - c_lt) * (1.0 - c_gt)))


def slope_theory(params: ProcessParams, h: HorizonPair) -> float:
    """Regression slope of future on past increments of pi.

    Symmetric in the two horizons; tends to -1/2 when both are long compared
    with 1/kappa.
    """
    c_lt = autocorr(params, h.tau_lt)
    c_gt = autocorr(params, h.tau_gt)
    if 1.0 - c_lt < MIN_DECORRELATION or 1.0 - c_gt < MIN_DECORRELATION:
        raise HorizonTooSmall(f"horizon too small: ({h.tau_lt!r}, {h.tau_gt!r})")
    return float(_slope(c_lt, c_gt, autocorr(params, h.tau_lt + h.tau_gt)))


def slope_curve(params: ProcessParams, tau_lt, ratio: float) -> np.ndarray:
    """Vectorised :func:`slope_theory` on ``tau_lt`` (years) with ``tau_gt = ratio * tau_lt``."""
    tau_lt = np.asarray(tau_lt, dtype=float)
    if np.any(tau_lt <= 0) or not ratio > 0:
        raise ParameterError("horizons must be > 0")
    tau_gt = ratio * tau_lt
    c_lt = autocorr(params, tau_lt)
    c_gt = autocorr(params, tau_gt)
    if np.any(1.0 - c_lt < MIN_DECORRELATION) or np.any(1.0 - c_gt < MIN_DECORRELATION):
        raise HorizonTooSmall("horizon too small")
    return np.asarray(_slope(c_lt, c_gt, autocorr(params, tau_lt + tau_gt)), dtype=float)


def slope_detrended(params: ProcessParams, h: HorizonPair, T: float) -> float:
    """Population slope of the de-trended (x, y) regression on model data.

    Accounts for the causal long-trend estimate over window ``T`` that the
    empirical pipeline subtracts; :func:`slope_theory` is the ``T -> inf``
    limit. Drift cancels exactly, so only pi enters.
    """
    return float(slope_detrended_curve(params, h.tau_lt, h.tau_gt / h.tau_lt, T))


def slope_detrended_curve(params: ProcessParams, tau_lt, ratio: float, T: float) -> np.ndarray:
    """Vectorised :func:`slope_detrended` with ``tau_gt = ratio * tau_lt``."""
    a = np.atleast_1d(np.asarray(tau_lt, dtype=float))
    if np.any(a <= 0) or not ratio > 0:
        raise ParameterError("horizons must be > 0")
    if np.any(a >= T):
        raise ParameterError("T must exceed tau_lt")
    b = ratio * a
    zero = np.zeros_like(a)
    # x and y as weights on pi at times (t, t - a, t - T, t + b).
    times = np.stack([zero, -a, np.full_like(a, -T), b], axis=1)
    wx = np.stack([1.0 - a / T, -np.ones_like(a), a / T, zero], axis=1)
    wy = np.stack([-1.0 - b / T, zero, b / T, np.ones_like(a)], axis=1)
    cov = covariance(params, np.abs(times[:, :, None] - times[:, None, :]))
    cxy = np.einsum("ni,nij,nj->n", wx, cov, wy)
    vx = np.einsum("ni,nij,nj->n", wx, cov, wx)
    vy = np.einsum("ni,nij,nj->n", wy, cov, wy)
    out = cxy / np.sqrt(vx * vy)
    return out if np.ndim(tau_lt) else out.reshape(())


def slope_zero_crossing(params: ProcessParams, ratio: float = 0.2) -> float:
    """Past horizon (years) where the theoretical slope changes sign.

    Bisection on the bracket [5 trading days, 20 years].
    """
    if not 0 < ratio:
        raise ParameterError("ratio must be > 0")

    def s(tau):
        return slope_theory(params, HorizonPair(tau, ratio * tau))

    lo, hi = CROSSING_BRACKET
    s_lo, s_hi = s(lo), s(hi)
    if s_lo == 0.0:
        return lo
    if s_hi == 0.0:
        return hi
    if (s_lo > 0) == (s_hi > 0):
        raise NoCrossing(
            f"no sign change of the slope on [{lo:.6g}, {hi:.6g}] years"
        )
    while hi - lo > CROSSING_RTOL * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        s_mid = s(mid)
        if s_mid == 0.0:
            return mid
        if (s_mid > 0) == (s_lo > 0):
            lo, s_lo = mid, s_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mean_reversion_time(delta: float, annual_vol: float) -> float:
    """Time for a random walk of volatility ``annual_vol`` to diffuse across ``delta``."""
    if annual_vol <= 0:
        raise ParameterError("annual_vol must be > 0")
    return (delta / annual_vol) ** 2


def black_band(params: ProcessParams, daily_vol: float) -> BandReport:
    """Infer sigma^2 from the short-term volatility and derive the band width.

    Short-term annual volatility is sqrt(2 kappa) sigma, so
    sigma^2 = 252 daily_vol^2 / (2 kappa); ``params.sigma2`` is ignored.
    """
    if not (daily_vol > 0 and math.isfinite(daily_vol)):
        raise ParameterError(f"daily_vol must be > 0, got {daily_vol!r}")
    annual_var = daily_vol**2 * TRADING_DAYS_PER_YEAR
    sigma2 = annual_var / (2.0 * params.kappa)
    delta = math.sqrt(sigma2 * (1.0 + params.g))
    t_mr = mean_reversion_time(delta, daily_vol * math.sqrt(TRADING_DAYS_PER_YEAR))
    return BandReport(
        sigma2=sigma2,
        delta=delta,
        t_mr=t_mr,
        daily_vol=daily_vol,
        params=params.with_sigma2(sigma2),
    )
