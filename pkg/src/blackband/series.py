"""Price series container and frequency handling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .model import MONTHS_PER_YEAR, TRADING_DAYS_PER_YEAR

FREQUENCIES = ("daily", "monthly")
KINDS = ("spot", "future")

OBS_PER_YEAR = {"daily": TRADING_DAYS_PER_YEAR, "monthly": MONTHS_PER_YEAR}

# Median spacing (calendar days) at or below which a series counts as daily.
DAILY_MEDIAN_MAX_DAYS = 4
# Single gaps allowed before a series is declared mixed-frequency.
DAILY_MAX_GAP_DAYS = 31
MONTHLY_MIN_GAP_DAYS = 20


def infer_frequency(dates) -> str:
    """Classify observation dates as ``daily`` or ``monthly``.

    Raises DataError when individual gaps contradict the median spacing
    (a daily series with a month-long hole, a monthly one with a weekly step).
    """
    dates = np.asarray(dates, dtype="datetime64[D]")
    if dates.size < 2:
        raise DataError("need at least two observations to infer frequency")
    gaps = np.diff(dates).astype(np.int64)
    freq = "daily" if np.median(gaps) <= DAILY_MEDIAN_MAX_DAYS else "monthly"
    if freq == "daily" and gaps.max() > DAILY_MAX_GAP_DAYS:
        raise DataError(f"mixed frequency: daily series with a {gaps.max()}-day gap")
    if freq == "monthly" and gaps.min() < MONTHLY_MIN_GAP_DAYS:
        raise DataError(f"mixed frequency: monthly series with a {gaps.min()}-day step")
    return freq


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Log-price observations of one instrument at a fixed frequency.

    Log prices are stored so that series built from simulated log prices
    keep them exactly; ``prices`` exponentiates on demand.
    """

    symbol: str
    frequency: str
    dates: np.ndarray
    log_prices: np.ndarray
    kind: str = "future"
    # Prices as read, when built from prices; exp(log p) can differ by an ulp.
    raw_prices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        logp = np.asarray(self.log_prices, dtype=np.float64)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "log_prices", logp)
        if self.frequency not in FREQUENCIES:
            raise DataError(f"unknown frequency {self.frequency!r}")
        if self.kind not in KINDS:
            raise DataError(f"unknown kind {self.kind!r}")
        if dates.ndim != 1 or dates.shape != logp.shape:
            raise DataError("dates and prices must be 1-d and of equal length")
        if dates.size > 1 and np.any(np.diff(dates) <= np.timedelta64(0, "D")):
            raise DataError(f"{self.symbol}: dates must be strictly increasing")
        if not np.all(np.isfinite(logp)):
            raise DataError(f"{self.symbol}: prices must be positive and finite")
        if self.raw_prices is not None and np.shape(self.raw_prices) != logp.shape:
            raise DataError("raw prices must match log prices")
        if dates.size > 2 and infer_frequency(dates) != self.frequency:
            raise DataError(
                f"{self.symbol}: declared {self.frequency} but spacing says otherwise"
            )

    @classmethod
    def from_prices(cls, symbol, dates, prices, frequency=None, kind="future"):
        prices = np.asarray(prices, dtype=np.float64)
        if np.any(~(prices > 0)) or not np.all(np.isfinite(prices)):
            raise DataError(f"{symbol}: prices must be strictly positive and finite")
        if frequency is None:
            frequency = infer_frequency(dates)
        return cls(symbol, frequency, dates, np.log(prices), kind, raw_prices=prices)

    @property
    def prices(self) -> np.ndarray:
        if self.raw_prices is not None:
            return self.raw_prices
        return np.exp(self.log_prices)

    @property
    def obs_per_year(self) -> int:
        return OBS_PER_YEAR[self.frequency]

    def __len__(self):
        return self.dates.size

    def __eq__(self, other):
        if not isinstance(other, PriceSeries):
            return NotImplemented
        return (
            self.symbol == other.symbol
            and self.frequency == other.frequency
            and self.kind == other.kind
            and np.array_equal(self.dates, other.dates)
            and np.array_equal(self.log_prices, other.log_prices)
        )

    def truncate(self, last_date) -> "PriceSeries":
        """Observations up to and including ``last_date``."""
        n = int(np.searchsorted(self.dates, np.datetime64(last_date, "D"), side="right"))
        raw = None if self.raw_prices is None else self.raw_prices[:n]
        return PriceSeries(self.symbol, self.frequency, self.dates[:n], self.log_prices[:n], self.kind, raw)


def calendar(start_date, n: int, frequency: str) -> np.ndarray:
    """``n`` observation dates from ``start_date``: business days or month starts."""
    start = np.datetime64(start_date, "D")
    if frequency == "daily":
        return np.busday_offset(start, np.arange(n), roll="forward")
    if frequency == "monthly":
        months = np.datetime64(start, "M") + np.arange(n)
        return months.astype("datetime64[D]")
    raise DataError(f"unknown frequency {frequency!r}")
