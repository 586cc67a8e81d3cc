"""De-trended return pairs and the predictability regressions built on them.

For an anchor date t, with the causal long trend mu_t = log(p(t)/p(t-T)) / T,

    x = log p(t) - log p(t - tau_lt) - mu_t * tau_lt      (past)
    y = log p(t + tau_gt) - log p(t) - mu_t * tau_gt      (future)

Horizons are counted in native observations (trading days or months) and
converted to years with 252 or 12 observations per year. Every observation
date is used as an anchor, so neighbouring pairs overlap heavily; the naive
OLS standard errors reported here therefore understate the true
uncertainty. :func:`slope_stderr_clustered` gives a per-contract
cluster-robust alternative.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DataError, DegenerateDesign, InsufficientData, NoWindow, NumericalError, ParameterError
from .series import OBS_PER_YEAR, PriceSeries

log = logging.getLogger(__name__)

DAILY_GRID = (10, 20, 40, 80, 160, 320, 480, 640, 960, 1280)
MONTHLY_GRID = (5, 10, 15, 20, 25, 30, 40, 50, 60)
DEFAULT_GRIDS = {"daily": DAILY_GRID, "monthly": MONTHLY_GRID}

MIN_LINEAR = 10
MIN_CUBIC = 20
CUBIC_MAX_COND = 1e12
#: Raw return spread (log units) treated as zero; a perfect trend leaves only rounding noise.
DEGENERATE_SPREAD = 1e-12


@dataclass(frozen=True)
class DetrendConfig:
    T: float = 20.0
    tau_lt_grid: tuple = DAILY_GRID
    ratio: float = 0.2
    outlier_cut: float = 4.0
    min_history: bool = True
    per_contract: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tau_lt_grid", tuple(int(t) for t in self.tau_lt_grid))
        if not 0 < self.ratio <= 1:
            raise ParameterError(f"ratio must lie in (0, 1], got {self.ratio!r}")
        if not self.T > 0:
            raise ParameterError("T must be > 0")
        if not self.outlier_cut > 0:
            raise ParameterError("outlier_cut must be > 0")
        if any(t < 1 for t in self.tau_lt_grid):
            raise ParameterError("tau_lt grid values must be positive integers")

    @classmethod
    def for_frequency(cls, frequency: str, **kw) -> "DetrendConfig":
        kw.setdefault("tau_lt_grid", DEFAULT_GRIDS[frequency])
        return cls(**kw)

    def tau_gt(self, tau_lt: int) -> int:
        """Future horizon in native observations for a given past horizon."""
        b = int(round(self.ratio * tau_lt))
        if b < 1:
            raise ParameterError(f"ratio * tau_lt rounds to zero for tau_lt={tau_lt}")
        return b

    def check_frequency(self, frequency: str) -> None:
        opy = OBS_PER_YEAR[frequency]
        longest = max(self.tau_lt_grid) * (1 + self.ratio) / opy
        if not self.T > longest:
            raise ParameterError(
                f"T={self.T} years must exceed the longest window {longest:.4g} years"
            )


class ReturnPair(NamedTuple):
    x: float
    y: float
    symbol: str
    t: np.datetime64


@dataclass(frozen=True, eq=False)
class ReturnPairs:
    """A sub-pool of normalized (x, y) points, stored column-wise.

    ``x_raw``/``y_raw`` keep the de-trended returns before normalization and
    ``mu`` the long trend used at each anchor. ``groups`` indexes ``symbols``.
    """

    x: np.ndarray
    y: np.ndarray
    x_raw: np.ndarray
    y_raw: np.ndarray
    mu: np.ndarray
    groups: np.ndarray
    dates: np.ndarray
    symbols: tuple = ()
    tau_lt: int = 0
    tau_gt: int = 0

    @classmethod
    def from_xy(cls, x, y, groups=None) -> "ReturnPairs":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if groups is None:
            groups = np.zeros(x.size, dtype=np.int64)
        groups = np.asarray(groups, dtype=np.int64)
        symbols = tuple(str(g) for g in range(int(groups.max()) + 1)) if x.size else ()
        dates = np.full(x.size, np.datetime64("NaT"), dtype="datetime64[D]")
        return cls(x, y, x, y, np.zeros_like(x), groups, dates, symbols)

    def __len__(self):
        return self.x.size

    def __iter__(self) -> Iterator[ReturnPair]:
        for i in range(self.x.size):
            yield ReturnPair(float(self.x[i]), float(self.y[i]), self.symbols[self.groups[i]], self.dates[i])


def _trend_lookback(series: PriceSeries, T: float) -> int:
    return int(round(T * series.obs_per_year))


def long_trend(series: PriceSeries, t, T: float = 20.0, min_history: bool = True) -> float:
    """Causal long-term log-price trend (per year) seen from date ``t``.

    Uses the last observation at or before ``t`` and the one ``T`` years of
    observations earlier. With ``min_history=False`` a short history shrinks
    the window instead of failing.
    """
    i = int(np.searchsorted(series.dates, np.datetime64(t, "D"), side="right")) - 1
    if i < 0:
        raise NoWindow(f"{series.symbol}: no observation at or before {t}")
    n = _trend_lookback(series, T)
    if i < n:
        if min_history or i == 0:
            raise NoWindow(f"{series.symbol}: less than {T} years of history before {t}")
        return (series.log_prices[i] - series.log_prices[0]) / (i / series.obs_per_year)
    L = series.log_prices
    return (L[i] - L[i - n]) / T


def _raw_pairs(series: PriceSeries, cfg: DetrendConfig, a: int, b: int):
    L = series.log_prices
    n_obs = L.size
    opy = series.obs_per_year
    n_T = _trend_lookback(series, cfg.T)
    first = max(n_T, a) if cfg.min_history else max(a, 1)
    idx = np.arange(first, n_obs - b)
    if idx.size == 0:
        return None
    if cfg.min_history:
        mu = (L[idx] - L[idx - n_T]) / cfg.T
    else:
        back = np.minimum(idx, n_T)
        mu = (L[idx] - L[idx - back]) / (back / opy)
    x = L[idx] - L[idx - a] - mu * (a / opy)
    y = L[idx + b] - L[idx] - mu * (b / opy)
    return idx, mu, x, y


def _normalize(v: np.ndarray) -> np.ndarray:
    sd = v.std()
    if not sd > DEGENERATE_SPREAD or not math.isfinite(sd):
        return np.zeros_like(v)
    return v / sd


def build_pairs(pool: Sequence[PriceSeries], cfg: DetrendConfig, tau_lt: int) -> ReturnPairs:
    """All normalized (x, y) points for one past horizon across the pool.

    ``tau_lt`` is in native observations. Normalization divides by the
    population standard deviation over the whole sub-pool (or per contract
    when ``cfg.per_contract``). A (numerically) zero spread, as for a perfectly
    trending series, leaves the points at zero.
    """
    if not pool:
        raise DataError("empty pool")
    freqs = {s.frequency for s in pool}
    if len(freqs) != 1:
        raise DataError(f"pool mixes frequencies {sorted(freqs)}")
    cfg.check_frequency(freqs.pop())
    a = int(tau_lt)
    if a < 1:
        raise ParameterError("tau_lt must be >= 1 observation")
    b = cfg.tau_gt(a)

    cols = {k: [] for k in ("x", "y", "xn", "yn", "mu", "g", "d")}
    symbols = []
    for series in pool:
        raw = _raw_pairs(series, cfg, a, b)
        if raw is None:
            continue
        idx, mu, x, y = raw
        cols["x"].append(x)
        cols["y"].append(y)
        cols["xn"].append(_normalize(x))
        cols["yn"].append(_normalize(y))
        cols["mu"].append(mu)
        cols["g"].append(np.full(idx.size, len(symbols), dtype=np.int64))
        cols["d"].append(series.dates[idx])
        symbols.append(series.symbol)

    if not symbols:
        empty = np.empty(0)
        return ReturnPairs(empty, empty, empty, empty, empty, np.empty(0, np.int64),
                           np.empty(0, "datetime64[D]"), (), a, b)
    x_raw = np.concatenate(cols["x"])
    y_raw = np.concatenate(cols["y"])
    if cfg.per_contract:
        x, y = np.concatenate(cols["xn"]), np.concatenate(cols["yn"])
    else:
        x, y = _normalize(x_raw), _normalize(y_raw)
    return ReturnPairs(
        x=x,
        y=y,
        x_raw=x_raw,
        y_raw=y_raw,
        mu=np.concatenate(cols["mu"]),
        groups=np.concatenate(cols["g"]),
        dates=np.concatenate(cols["d"]),
        symbols=tuple(symbols),
        tau_lt=a,
        tau_gt=b,
    )


def _keep(pairs: ReturnPairs, cut: float) -> np.ndarray:
    return (np.abs(pairs.x) <= cut) & (np.abs(pairs.y) <= cut)


class LinearFit(NamedTuple):
    slope: float
    stderr: float
    n_kept: int
    intercept: float


def fit_linear(pairs: ReturnPairs, outlier_cut: float = 4.0) -> LinearFit:
    """OLS of y on x with intercept after dropping points beyond ``outlier_cut``."""
    keep = _keep(pairs, outlier_cut)
    x, y = pairs.x[keep], pairs.y[keep]
    n = x.size
    if n < MIN_LINEAR:
        raise InsufficientData(f"{n} pairs after filtering, need {MIN_LINEAR}")
    xc = x - x.mean()
    sxx = xc @ xc
    if sxx == 0:
        raise InsufficientData("all x values identical")
    slope = (xc @ (y - y.mean())) / sxx
    intercept = y.mean() - slope * x.mean()
    resid = y - intercept - slope * x
    stderr = math.sqrt((resid @ resid) / (n - 2) / sxx)
    return LinearFit(float(slope), stderr, int(n), float(intercept))


def slope_stderr_clustered(pairs: ReturnPairs, outlier_cut: float = 4.0) -> float:
    """Cluster-robust (by contract) standard error of the :func:`fit_linear` slope.

    Overlapping windows make pairs from one contract strongly dependent while
    distinct contracts stay independent, so this is the honest error bar
    when the pool holds many contracts.
    """
    keep = _keep(pairs, outlier_cut)
    x, y, grp = pairs.x[keep], pairs.y[keep], pairs.groups[keep]
    fit = fit_linear(pairs, outlier_cut)
    xc = x - x.mean()
    resid = y - fit.intercept - fit.slope * x
    X = np.column_stack([np.ones_like(xc), xc])
    return float(_cluster_se(X, resid, grp)[1])


def _cluster_se(X: np.ndarray, resid: np.ndarray, groups: np.ndarray) -> np.ndarray:
    """Sandwich standard errors with scores summed within each group."""
    present = np.unique(groups)
    if present.size < 2:
        raise InsufficientData("need at least two contracts for clustered errors")
    _, inverse = np.unique(groups, return_inverse=True)
    scores = np.zeros((present.size, X.shape[1]))
    np.add.at(scores, inverse, X * resid[:, None])
    bread = np.linalg.inv(X.T @ X)
    cov = present.size / (present.size - 1) * bread @ (scores.T @ scores) @ bread
    return np.sqrt(np.diag(cov))


def cubic_stderr_clustered(pairs: ReturnPairs, outlier_cut: float = 4.0) -> tuple:
    """Cluster-robust (by contract) standard errors of the :func:`fit_cubic` coefficients."""
    fit = fit_cubic(pairs, outlier_cut)
    keep = _keep(pairs, outlier_cut)
    X = np.vander(pairs.x[keep], 4, increasing=True)
    resid = pairs.y[keep] - X @ np.asarray(fit.coef)
    return tuple(float(s) for s in _cluster_se(X, resid, pairs.groups[keep]))


class CubicFit(NamedTuple):
    coef: tuple
    stderr: tuple
    n_kept: int


def fit_cubic(pairs: ReturnPairs, outlier_cut: float = 4.0) -> CubicFit:
    """OLS fit of y = c0 + c1 x + c2 x^2 + c3 x^3 on the filtered pairs."""
    keep = _keep(pairs, outlier_cut)
    x, y = pairs.x[keep], pairs.y[keep]
    n = x.size
    if n < MIN_CUBIC:
        raise InsufficientData(f"{n} pairs after filtering, need {MIN_CUBIC}")
    X = np.vander(x, 4, increasing=True)
    q, r = np.linalg.qr(X)
    if np.any(np.abs(np.diag(r)) == 0) or np.linalg.cond(r) > CUBIC_MAX_COND:
        raise DegenerateDesign("cubic design matrix is (near) singular")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    rinv = np.linalg.inv(r)
    s2 = (resid @ resid) / (n - 4)
    se = np.sqrt(s2 * np.sum(rinv * rinv, axis=1))
    return CubicFit(tuple(float(c) for c in coef), tuple(float(s) for s in se), int(n))


_NAN4 = (math.nan,) * 4


@dataclass(frozen=True)
class CurveEntry:
    tau_lt: int
    tau_lt_years: float
    tau_gt: int
    n_pairs_raw: int = 0
    n_pairs_kept: int = 0
    slope: float = math.nan
    slope_stderr: float = math.nan
    cubic: tuple = _NAN4
    cubic_stderrs: tuple = _NAN4
    status: str = "empty"
    message: str = ""

    @property
    def empty(self) -> bool:
        return self.status == "empty"

    @property
    def tau_gt_years(self) -> float:
        return self.tau_gt * self.tau_lt_years / self.tau_lt


@dataclass(frozen=True)
class PredictabilityCurve:
    entries: tuple
    frequency: str = "daily"
    ratio: float = 0.2
    T: float = 20.0

    @property
    def all_empty(self) -> bool:
        return all(e.empty for e in self.entries)

    def nonempty(self) -> list:
        return [e for e in self.entries if not e.empty]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.entries], dtype=float)


def _curve_entry(pool, cfg: DetrendConfig, tau_lt: int, opy: int) -> CurveEntry:
    b = cfg.tau_gt(tau_lt)
    base = dict(tau_lt=int(tau_lt), tau_lt_years=tau_lt / opy, tau_gt=b)
    try:
        pairs = build_pairs(pool, cfg, tau_lt)
    except (DataError, NumericalError) as exc:
        return CurveEntry(**base, message=str(exc))
    try:
        lin = fit_linear(pairs, cfg.outlier_cut)
    except (DataError, NumericalError) as exc:
        return CurveEntry(**base, n_pairs_raw=len(pairs), message=str(exc))
    entry = dict(
        base,
        n_pairs_raw=len(pairs),
        n_pairs_kept=lin.n_kept,
        slope=lin.slope,
        slope_stderr=lin.stderr,
    )
    try:
        cub = fit_cubic(pairs, cfg.outlier_cut)
    except (DataError, NumericalError) as exc:
        return CurveEntry(**entry, status="partial", message=str(exc))
    return CurveEntry(**entry, cubic=cub.coef, cubic_stderrs=cub.stderr, status="ok")


def predictability_curve(
    pool: Sequence[PriceSeries], cfg: DetrendConfig, *, threads: int | None = 1
) -> PredictabilityCurve:
    """Linear and cubic fits for every past horizon of ``cfg.tau_lt_grid``.

    Horizons that cannot be fitted stay in the curve, marked empty. An
    all-empty curve is returned with a warning rather than raised, so a
    batch run can still emit its (empty) output.
    """
    if not cfg.tau_lt_grid:
        raise ParameterError("empty tau_lt grid")
    if not pool:
        raise DataError("empty pool")
    freqs = {s.frequency for s in pool}
    if len(freqs) != 1:
        raise DataError(f"pool mixes frequencies {sorted(freqs)}")
    frequency = freqs.pop()
    cfg.check_frequency(frequency)
    opy = OBS_PER_YEAR[frequency]

    def work(tau):
        return _curve_entry(pool, cfg, tau, opy)

    if threads is None or threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            entries = tuple(ex.map(work, cfg.tau_lt_grid))
    else:
        entries = tuple(map(work, cfg.tau_lt_grid))

    curve = PredictabilityCurve(entries, frequency, cfg.ratio, cfg.T)
    for e in entries:
        if e.status != "ok":
            log.warning("tau_lt=%d %s: %s", e.tau_lt, e.status, e.message)
    if curve.all_empty:
        warnings.warn("every horizon of the predictability curve is empty", RuntimeWarning)
    return curve
