"""Exact-discretization sampler for the trending OU log-price.

The correlated part of the driving noise is carried by an auxiliary OU
state m(t) with decay rate gamma and stationary variance
V = sigma^2 kappa g (gamma + kappa), so the pair (pi, m) is linear-Gaussian:

    d(pi, m) = A (pi, m) dt + dW,   A = [[-kappa, 1], [0, -gamma]],
    Q = diag(2 sigma^2 kappa, 2 gamma V).

One step of length dt is sampled from its exact Gaussian transition, with no
discretization bias.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm

from . import _accel
from .errors import DataError, NumericalError, ParameterError
from .model import MONTHS_PER_YEAR, TRADING_DAYS_PER_YEAR, ProcessParams
from .series import PriceSeries, calendar

_PATH_CHUNK = 32


@dataclass(frozen=True)
class SimConfig:
    params: ProcessParams
    dt: float
    n_steps: int
    n_paths: int = 1
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be > 0, got {self.dt!r}")
        if self.n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        if self.n_paths < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.burn_in < 0:
            raise ParameterError("burn_in must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class SimPath:
    pi: np.ndarray
    dt: float
    meta: str
    path_id: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.pi.size) * self.dt


def drift_and_noise(params: ProcessParams):
    """Drift matrix A and noise intensity Q of the (pi, m) system."""
    k, gm, s2, g = params.kappa, params.gamma, params.sigma2, params.g
    A = np.array([[-k, 1.0], [0.0, -gm]])
    V = s2 * k * g * (gm + k)
    Q = np.diag([2.0 * s2 * k, 2.0 * gm * V])
    return A, Q


def stationary_covariance(params: ProcessParams) -> np.ndarray:
    """Joint stationary covariance of (pi, m); solves A P + P A' + Q = 0."""
    k, gm, s2, g = params.kappa, params.gamma, params.sigma2, params.g
    V = s2 * k * g * (gm + k)
    c = V / (k + gm)
    return np.array([[params.variance, c], [c, V]])


def transition(params: ProcessParams, dt: float):
    """Exact one-step transition: x(t+dt) | x(t) ~ N(F x(t), Qd).

    Uses Van Loan's block exponential, which stays exact and well-conditioned
    through gamma = kappa (no special branch needed).
    """
    A, Q = drift_and_noise(params)
    M = np.zeros((4, 4))
    M[:2, :2] = -A
    M[:2, 2:] = Q
    M[2:, 2:] = A.T
    E = expm(M * dt)
    F = E[2:, 2:].T
    Qd = F @ E[:2, 2:]
    Qd = 0.5 * (Qd + Qd.T)
    F[1, 0] = 0.0  # exactly zero: m does not feel pi
    return F, Qd


def _cholesky2(S: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a 2x2 PSD matrix, tolerating a zero block (g = 0)."""
    l00 = math.sqrt(max(S[0, 0], 0.0))
    l10 = S[1, 0] / l00 if l00 > 0 else 0.0
    l11 = math.sqrt(max(S[1, 1] - l10 * l10, 0.0))
    return np.array([[l00, 0.0], [l10, l11]])


def _path_rng(seed: int, path_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(path_id,)))


def simulate_array(config: SimConfig, *, threads=None, use_numba=None) -> np.ndarray:
    """Sample pi on the grid k*dt; returns an (n_paths, n_steps) array.

    Path ``i`` draws from its own substream ``SeedSequence(seed, spawn_key=(i,))``,
    so output does not depend on chunking, thread count or kernel choice.
    """
    F, Qd = transition(config.params, config.dt)
    L = _cholesky2(Qd)
    L0 = _cholesky2(stationary_covariance(config.params))
    n_trans = config.burn_in + config.n_steps - 1
    out = np.empty((config.n_paths, config.n_steps))
    _accel.set_threads(threads)
    for start in range(0, config.n_paths, _PATH_CHUNK):
        ids = range(start, min(start + _PATH_CHUNK, config.n_paths))
        x0 = np.empty((len(ids), 2))
        Z = np.empty((len(ids), n_trans, 2))
        for row, i in enumerate(ids):
            rng = _path_rng(config.seed, i)
            x0[row] = L0 @ rng.standard_normal(2)
            Z[row] = rng.standard_normal((n_trans, 2))
        out[start : start + len(ids)] = _accel.propagate(
            x0, F, L, Z, config.burn_in, config.n_steps, use_numba=use_numba
        )
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite value in simulated path")
    return out


def simulate(config: SimConfig, *, threads=None, use_numba=None) -> list[SimPath]:
    arr = simulate_array(config, threads=threads, use_numba=use_numba)
    meta = config.digest()
    return [SimPath(arr[i], config.dt, meta, i) for i in range(config.n_paths)]


_STEP = {"daily": 1.0 / TRADING_DAYS_PER_YEAR, "monthly": 1.0 / MONTHS_PER_YEAR}


def to_price_series(
    path: SimPath,
    start_date,
    frequency: str = "daily",
    base_drift: float = 0.0,
    symbol: str | None = None,
    kind: str = "future",
) -> PriceSeries:
    """Wrap pi into a calendar-stamped series with log p = base_drift * t + pi."""
    if frequency not in _STEP:
        raise DataError(f"unknown frequency {frequency!r}")
    if abs(path.dt - _STEP[frequency]) > 1e-12:
        raise DataError(f"path dt={path.dt!r} does not match {frequency} observations")
    logp = path.pi if base_drift == 0.0 else base_drift * path.times + path.pi
    if symbol is None:
        symbol = f"SIM{path.path_id:04d}"
    return PriceSeries(symbol, frequency, calendar(start_date, path.pi.size, frequency), logp, kind)


def sample_autocovariance(paths: np.ndarray, lags_steps, *, use_numba=None):
    """Pooled zero-mean autocovariance at integer lags and its Monte Carlo standard error.

    The standard error comes from the spread of per-path estimates, which are
    independent by construction.
    """
    per_path = _accel.lagged_products(paths, np.asarray(lags_steps), use_numba=use_numba)
    n = per_path.shape[0]
    se = per_path.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(per_path.shape[1], np.nan)
    return per_path.mean(axis=0), se
