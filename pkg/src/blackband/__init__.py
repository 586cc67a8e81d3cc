"""Trend and mean-reversion analytics for de-trended log-prices."""

__version__ = "0.1.0"

from .errors import (
    BlackBandError,
    DataError,
    DegenerateDesign,
    HorizonTooSmall,
    InsufficientData,
    NoConvergence,
    NoCrossing,
    NoWindow,
    NumericalError,
    ParameterError,
)
from .model import (
    FUTURES,
    SPOT,
    BandReport,
    HorizonPair,
    ProcessParams,
    autocorr,
    black_band,
    covariance,
    slope_detrended,
    slope_theory,
    slope_zero_crossing,
)
from .series import PriceSeries
from .sim import SimConfig, SimPath, simulate, to_price_series
from .empirics import (
    DetrendConfig,
    PredictabilityCurve,
    build_pairs,
    fit_cubic,
    fit_linear,
    long_trend,
    predictability_curve,
)
from .calibration import CalibrationProblem, CalibrationResult, calibrate, report
