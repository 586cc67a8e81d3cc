"""Fit (g, kappa, gamma) to an empirical predictability curve.

Weighted least squares on the model slope, searched in log-parameter space
with a bounded Nelder-Mead simplex from a fixed set of starts. sigma^2 never
enters the slope and is attached afterwards from a volatility input (see
:func:`report`).

Which model slope is fitted depends on how the curve was measured: curves
produced by the de-trending pipeline carry their trend window ``T`` and are
compared with :func:`~blackband.model.slope_detrended_curve`; theoretical
curves (``T = inf``) use the plain :func:`~blackband.model.slope_curve`.
Set ``model="plain"`` to force the latter.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .empirics import DAILY_GRID, CurveEntry, PredictabilityCurve
from .errors import InsufficientData, NoConvergence, NoCrossing, NumericalError, ParameterError
from .model import (
    FUTURES,
    BandReport,
    ProcessParams,
    black_band,
    slope_curve,
    slope_detrended_curve,
    slope_zero_crossing,
)
from .series import OBS_PER_YEAR

DEFAULT_BOUNDS = {"g": (0.0, 10.0), "kappa": (1 / 100, 52.0), "gamma": (1 / 100, 252.0)}

# g = 0 has no logarithm; the search floor stands in for it.
G_FLOOR = 1e-6
# The start lattice uses this lower edge for g rather than the search floor.
G_LATTICE_MIN = 1e-3

XATOL = 1e-9
MAX_ITER = 2000
SIMPLEX_STEP = 0.5
MIN_POINTS = 4
_BAD_LOSS = 1e300


@dataclass(frozen=True)
class CalibrationProblem:
    curve: PredictabilityCurve
    ratio: float | None = None
    bounds: dict = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    init: ProcessParams = FUTURES
    weight_mode: str = "stderr"
    model: str = "auto"

    def __post_init__(self):
        if self.model not in ("auto", "plain", "detrended"):
            raise ParameterError(f"unknown model {self.model!r}")
        if self.model == "detrended" and not math.isfinite(self.curve.T):
            raise ParameterError("detrended model needs a curve with a finite T")
        if self.ratio is None:
            object.__setattr__(self, "ratio", self.curve.ratio)
        if not self.ratio > 0:
            raise ParameterError("ratio must be > 0")
        if self.weight_mode not in ("stderr", "uniform"):
            raise ParameterError(f"unknown weight_mode {self.weight_mode!r}")
        for name in ("g", "kappa", "gamma"):
            lo, hi = self.bounds[name]
            if not (0 <= lo < hi) or (name != "g" and lo <= 0):
                raise ParameterError(f"bad bounds for {name}: {(lo, hi)}")

    def data(self):
        """Horizons (years), slopes and weights of the usable curve entries."""
        entries = [e for e in self.curve.entries if not e.empty and math.isfinite(e.slope)]
        if len(entries) < MIN_POINTS:
            raise InsufficientData(f"{len(entries)} usable curve points, need {MIN_POINTS}")
        tau = np.array([e.tau_lt_years for e in entries])
        s = np.array([e.slope for e in entries])
        if self.weight_mode == "uniform":
            w = np.ones_like(s)
        else:
            se = np.array([e.slope_stderr for e in entries])
            if np.any(~(se > 0)) or not np.all(np.isfinite(se)):
                raise InsufficientData("stderr weighting needs positive finite stderrs")
            w = 1.0 / se**2
        return tau, s, w

    @property
    def trend_window(self) -> float:
        """T used by the model slope; inf means the plain closed form."""
        if self.model == "plain":
            return math.inf
        return self.curve.T

    def log_bounds(self):
        lo_g = max(self.bounds["g"][0], G_FLOOR)
        return [
            (math.log(lo_g), math.log(self.bounds["g"][1])),
            tuple(math.log(v) for v in self.bounds["kappa"]),
            tuple(math.log(v) for v in self.bounds["gamma"]),
        ]


@dataclass(frozen=True)
class CalibrationResult:
    params: ProcessParams
    loss: float
    n_iter: int
    converged: bool
    residuals: tuple
    tau_lt_years: tuple
    ratio: float
    T: float = math.inf

    def as_dict(self) -> dict:
        return {
            "g": self.params.g,
            "kappa": self.params.kappa,
            "gamma": self.params.gamma,
            "kappa_inv_years": 1.0 / self.params.kappa,
            "gamma_inv_days": 252.0 / self.params.gamma,
            "loss": self.loss,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "ratio": self.ratio,
            "T": self.T if math.isfinite(self.T) else None,
            "tau_lt_years": list(self.tau_lt_years),
            "residuals": list(self.residuals),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationResult":
        return cls(
            params=ProcessParams(d["g"], d["kappa"], d["gamma"]),
            loss=d["loss"],
            n_iter=d["n_iter"],
            converged=d["converged"],
            residuals=tuple(d["residuals"]),
            tau_lt_years=tuple(d["tau_lt_years"]),
            ratio=d["ratio"],
            T=math.inf if d.get("T") is None else d["T"],
        )


def _params(theta) -> ProcessParams:
    g, k, gm = np.exp(theta)
    return ProcessParams(float(g), float(k), float(gm))


def model_slopes(params: ProcessParams, tau, ratio: float, T: float = math.inf) -> np.ndarray:
    if math.isfinite(T):
        return slope_detrended_curve(params, tau, ratio, T)
    return slope_curve(params, tau, ratio)


def weighted_loss(params: ProcessParams, tau, s, w, ratio, T=math.inf) -> float:
    r = s - model_slopes(params, tau, ratio, T)
    return float(np.sum(w * r * r))


def start_points(problem: CalibrationProblem) -> list:
    """Eight lattice corners at 1/4 and 3/4 of the log box, then the initial guess."""
    lb = problem.log_bounds()
    lb[0] = (math.log(max(problem.bounds["g"][0], G_LATTICE_MIN)), lb[0][1])
    levels = [(lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)) for lo, hi in lb]
    starts = [np.array(c) for c in itertools.product(*levels)]
    p = problem.init
    starts.append(np.log([max(p.g, G_FLOOR), p.kappa, p.gamma]))
    return [np.clip(s, [b[0] for b in lb], [b[1] for b in lb]) for s in starts]


def _run_start(objective, theta0, bounds):
    simplex = np.vstack([theta0] + [theta0 + SIMPLEX_STEP * e for e in np.eye(3)])
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    # Step inward where a vertex would leave the box.
    for i in range(1, 4):
        j = i - 1
        if simplex[i, j] > hi[j]:
            simplex[i, j] = theta0[j] - SIMPLEX_STEP
    simplex = np.clip(simplex, lo, hi)
    return minimize(
        objective,
        theta0,
        method="Nelder-Mead",
        bounds=bounds,
        options={
            "initial_simplex": simplex,
            "xatol": XATOL,
            "fatol": math.inf,
            "maxiter": MAX_ITER,
            "maxfev": 20 * MAX_ITER,
        },
    )


def calibrate(problem: CalibrationProblem) -> CalibrationResult:
    """Best fit over all starts; ties go to the smallest (g, kappa, gamma).

    Raises NoConvergence (carrying the best-effort result) when no start
    shrinks its simplex below the tolerance.
    """
    tau, s, w = problem.data()
    ratio = problem.ratio
    T = problem.trend_window
    bounds = problem.log_bounds()

    def objective(theta):
        try:
            return weighted_loss(_params(theta), tau, s, w, ratio, T)
        except (NumericalError, ParameterError):
            return _BAD_LOSS

    runs = []
    for theta0 in start_points(problem):
        res = _run_start(objective, theta0, bounds)
        theta = np.clip(res.x, [b[0] for b in bounds], [b[1] for b in bounds])
        params = _params(theta)
        runs.append((float(objective(theta)), (params.g, params.kappa, params.gamma), res, params))

    runs.sort(key=lambda r: (r[0], r[1]))
    converged_runs = [r for r in runs if r[2].status == 0]
    best = (converged_runs or runs)[0]
    loss, _, res, params = best
    if problem.bounds["g"][0] == 0.0 and params.g <= G_FLOOR * (1 + 1e-9):
        params = ProcessParams(0.0, params.kappa, params.gamma)
        loss = weighted_loss(params, tau, s, w, ratio, T)
    residuals = s - model_slopes(params, tau, ratio, T)
    result = CalibrationResult(
        params=params,
        loss=loss,
        n_iter=int(res.nit),
        converged=bool(converged_runs),
        residuals=tuple(float(r) for r in residuals),
        tau_lt_years=tuple(float(t) for t in tau),
        ratio=float(ratio),
        T=float(T),
    )
    if not converged_runs:
        raise NoConvergence("no start converged", result)
    return result


@dataclass(frozen=True)
class Report:
    band: BandReport
    crossing_years: float | None
    summary: str

    def as_dict(self) -> dict:
        d = self.band.as_dict()
        d["crossing_years"] = self.crossing_years
        return d


def report(result: CalibrationResult, daily_vol: float, ratio: float | None = None) -> Report:
    """Band width, mean-reversion time, price factor and slope sign change for a fit."""
    band = black_band(result.params, daily_vol)
    try:
        crossing = slope_zero_crossing(result.params, result.ratio if ratio is None else ratio)
    except NoCrossing:
        crossing = None
    p = result.params
    lines = [
        f"fit: g={p.g:.4g}  1/kappa={1 / p.kappa:.4g} y  1/gamma={252 / p.gamma:.4g} trading days"
        + ("" if result.converged else "  (NOT CONVERGED)"),
        f"daily vol {daily_vol:.4g} -> sigma^2 = {band.sigma2:.4g}",
        f"band width Delta = {band.delta:.4g}  (price within a factor {band.factor:.3g} of value)",
        f"mean-reversion time T_MR = {band.t_mr:.4g} years",
        "slope sign change: "
        + ("none" if crossing is None else f"tau_lt = {crossing:.4g} years ({crossing * 252:.0f} trading days)"),
    ]
    return Report(band, crossing, "\n".join(lines) + "\n")


def theory_curve(
    params: ProcessParams,
    grid=DAILY_GRID,
    frequency: str = "daily",
    ratio: float = 0.2,
    slopes=None,
    stderr: float = 1.0,
) -> PredictabilityCurve:
    """A curve whose slopes are the model's (or the given ``slopes``) on a native grid."""
    opy = OBS_PER_YEAR[frequency]
    tau = np.asarray(grid, dtype=float) / opy
    if slopes is None:
        slopes = slope_curve(params, tau, ratio)
    entries = tuple(
        CurveEntry(int(n), float(t), int(round(ratio * n)), slope=float(v), slope_stderr=stderr, status="ok")
        for n, t, v in zip(grid, tau, slopes)
    )
    return PredictabilityCurve(entries, frequency, ratio, math.inf)


def noise_study(params: ProcessParams, sd: float, seeds, grid=DAILY_GRID, frequency="daily", ratio=0.2):
    """Re-fit noisy copies of a theoretical curve; returns an (n_seeds, 3) array of (g, kappa, gamma)."""
    clean = theory_curve(params, grid, frequency, ratio).column("slope")
    out = []
    for seed in seeds:
        noisy = clean + sd * np.random.default_rng(seed).standard_normal(clean.size)
        curve = theory_curve(params, grid, frequency, ratio, slopes=noisy, stderr=sd)
        try:
            fit = calibrate(CalibrationProblem(curve, weight_mode="uniform")).params
        except NoConvergence as exc:
            fit = exc.result.params
        out.append((fit.g, fit.kappa, fit.gamma))
    return np.array(out)
