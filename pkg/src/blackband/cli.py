"""Command-line entry point: ``blackband <command> [options]``.

Commands: simulate, curve, theory, calibrate, report. Options can also come
from an INI file (``--config``): keys named like the long options (dashes or
underscores) in a ``[common]`` section and/or a section named after the
command. Flags on the command line win.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
import warnings

import numpy as np

from . import __version__
from . import io as bio
from .calibration import CalibrationProblem, CalibrationResult, calibrate, report
from .empirics import DEFAULT_GRIDS, DetrendConfig, predictability_curve
from .errors import BlackBandError, DataError, NoConvergence, NumericalError
from .model import (
    PRESETS,
    HorizonPair,
    ProcessParams,
    autocorr,
    black_band,
    slope_curve,
    slope_detrended,
)
from .series import OBS_PER_YEAR
from .sim import SimConfig, simulate, to_price_series

log = logging.getLogger("blackband")

# Re-exported: the CSV schema is part of the command-line contract.
ingest_csv = bio.ingest_csv

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _grid(text: str) -> tuple:
    try:
        grid = tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected comma-separated integers")
    if not grid:
        raise argparse.ArgumentTypeError("empty grid")
    return grid


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--preset", choices=sorted(PRESETS), default="futures")
    g.add_argument("--g", type=float, help="trend strength (overrides preset)")
    g.add_argument("--kappa-inv-years", type=float, help="mean-reversion time in years")
    g.add_argument("--gamma-inv-days", type=float, help="trend time in trading days")


def _params_from(args) -> ProcessParams:
    base = PRESETS[args.preset]
    return ProcessParams.from_horizons(
        base.g if args.g is None else args.g,
        1 / base.kappa if args.kappa_inv_years is None else args.kappa_inv_years,
        252 / base.gamma if args.gamma_inv_days is None else args.gamma_inv_days,
    )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with option defaults")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--save-config", help="write the effective options to this INI file")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="blackband", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate synthetic price series")
    _add_params(p)
    p.add_argument("--sigma2", type=float, help="variance scale (default: inferred from --daily-vol)")
    p.add_argument("--daily-vol", type=float, default=0.01)
    p.add_argument("--paths", type=int, default=200)
    p.add_argument("--years", type=float, default=30.0)
    p.add_argument("--frequency", choices=["daily", "monthly"], default="daily")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--drift", type=float, default=0.05, help="log-price drift per year")
    p.add_argument("--start", default="1960-01-01")
    p.add_argument("--kind", choices=["future", "spot"], default="future")
    p.add_argument("--out", "--emit-csv", dest="out", required=True, help="price CSV (date,symbol,price)")
    p.add_argument("--dump-paths", help="also write raw pi paths to this CSV")

    p = sub.add_parser("curve", parents=[common], help="empirical predictability curve")
    p.add_argument("--input", required=True, help="price CSV")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--T", dest="T", type=float, default=20.0, help="long-trend window, years")
    p.add_argument("--ratio", type=float, default=0.2)
    p.add_argument("--cut", type=float, default=4.0)
    p.add_argument("--grid", type=_grid, help="past horizons in native units (default per frequency)")
    p.add_argument("--per-contract", action="store_true")
    p.add_argument("--no-min-history", dest="min_history", action="store_false")

    p = sub.add_parser("theory", parents=[common], help="model slope and autocorrelation curves")
    _add_params(p)
    p.add_argument("--frequency", choices=["daily", "monthly"], default="daily")
    p.add_argument("--grid", type=_grid)
    p.add_argument("--ratio", type=float, default=0.2)
    p.add_argument("--T", dest="T", type=float, default=20.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="fit model parameters to a curve")
    p.add_argument("--curve", required=True, help="curve JSON or CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--weights", choices=["stderr", "uniform"], default="stderr")
    p.add_argument("--ratio", type=float, default=0.2, help="tau_gt/tau_lt for CSV curves")
    p.add_argument("--frequency", choices=["daily", "monthly"], default="daily")
    p.add_argument("--T", dest="T", type=float, default=20.0, help="trend window of CSV curves")
    p.add_argument(
        "--model",
        choices=["auto", "plain", "detrended"],
        default="auto",
        help="model slope to fit (auto: de-trended when the curve has a finite T)",
    )

    p = sub.add_parser("report", parents=[common], help="band width and mean-reversion time")
    p.add_argument("--result", help="calibration JSON (default: use model parameters)")
    _add_params(p)
    p.add_argument("--ratio", type=float, default=0.2)
    p.add_argument("--daily-vol", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="text summary path (default: stdout)")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    """Load INI defaults for the chosen command onto its subparser."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    first, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    if not first.config or command is None:
        return
    cp = configparser.ConfigParser()
    if not cp.read(first.config):
        parser.error(f"cannot read config file {first.config}")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[command]
    by_dest = {a.dest: a for a in subparser._actions}
    for opt in subparser._actions:
        for s in opt.option_strings:
            by_dest.setdefault(s.lstrip("-").replace("-", "_"), opt)
    values = {}
    for section in ("common", command):
        if cp.has_section(section):
            values.update(cp.items(section))
    defaults = {}
    for key, raw in values.items():
        action = by_dest.get(key.replace("-", "_"))
        if action is None or action.dest in ("config", "help"):
            parser.error(f"unknown config key {key!r} for {command}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            low = raw.strip().lower()
            if low not in _BOOL_TRUE | _BOOL_FALSE:
                parser.error(f"config key {key!r}: expected a boolean")
            on = low in _BOOL_TRUE
            # "min_history = false" names the dest; "no_min_history = true" names the flag.
            names_flag = key.replace("-", "_") != action.dest
            store_false = isinstance(action, argparse._StoreFalseAction)
            defaults[action.dest] = (not on) if (names_flag and store_false) else on
        elif isinstance(action, argparse._CountAction):
            try:
                defaults[action.dest] = int(raw)
            except ValueError:
                parser.error(f"config key {key!r}: expected an integer")
        else:
            defaults[action.dest] = raw  # argparse converts string defaults with `type`
            action.required = False
    subparser.set_defaults(**defaults)


def save_config(args, path) -> None:
    """Write the effective options of a run as INI (a reproducible RunConfig)."""
    cp = configparser.ConfigParser()
    items = {}
    for k, v in sorted(vars(args).items()):
        if k in ("command", "config", "save_config") or v is None:
            continue
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        items[k] = bio.fmt(v)
    cp[args.command] = items
    with open(path, "w") as fh:
        cp.write(fh)


# -- commands -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    params = _params_from(args)
    sigma2 = args.sigma2 if args.sigma2 is not None else black_band(params, args.daily_vol).sigma2
    params = params.with_sigma2(sigma2)
    opy = OBS_PER_YEAR[args.frequency]
    cfg = SimConfig(
        params=params,
        dt=1.0 / opy,
        n_steps=int(round(args.years * opy)),
        n_paths=args.paths,
        seed=args.seed,
        burn_in=args.burn_in,
    )
    paths = simulate(cfg, threads=args.threads)
    pool = [to_price_series(p, args.start, args.frequency, args.drift, kind=args.kind) for p in paths]
    bio.write_prices(pool, args.out)
    if args.dump_paths:
        bio.write_paths(paths, args.dump_paths)
    log.info("wrote %d paths x %d steps to %s", cfg.n_paths, cfg.n_steps, args.out)
    return 0


def cmd_curve(args) -> int:
    pool = bio.ingest_csv(args.input)
    freqs = {s.frequency for s in pool}
    frequency = "daily" if freqs == {"daily"} else "monthly" if freqs == {"monthly"} else None
    if frequency is None:
        raise DataError("input mixes daily and monthly series")
    cfg = DetrendConfig(
        T=args.T,
        tau_lt_grid=args.grid or DEFAULT_GRIDS[frequency],
        ratio=args.ratio,
        outlier_cut=args.cut,
        min_history=args.min_history,
        per_contract=args.per_contract,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        curve = predictability_curve(pool, cfg, threads=args.threads)
    if curve.all_empty:
        print("warning: every horizon of the curve is empty", file=sys.stderr)
    bio.write_curve_csv(curve, args.out_csv)
    bio.write_curve_json(curve, args.out_json)
    return 0


THEORY_FIELDS = ("tau_lt_native", "tau_lt_years", "tau_gt_years", "slope", "slope_detrended", "autocorr")


def cmd_theory(args) -> int:
    params = _params_from(args)
    opy = OBS_PER_YEAR[args.frequency]
    grid = args.grid or DEFAULT_GRIDS[args.frequency]
    tau = np.array(grid, dtype=float) / opy
    slopes = slope_curve(params, tau, args.ratio)
    with open(args.out, "w", newline="") as fh:
        fh.write(",".join(THEORY_FIELDS) + "\n")
        for n, t, s in zip(grid, tau, slopes):
            h = HorizonPair(t, args.ratio * t)
            det = slope_detrended(params, h, args.T) if args.T > t else math.nan
            row = (n, t, h.tau_gt, s, det, autocorr(params, t))
            fh.write(",".join(bio.fmt(v) for v in row) + "\n")
    return 0


def cmd_calibrate(args) -> int:
    curve = bio.read_curve(args.curve, ratio=args.ratio, frequency=args.frequency, T=args.T)
    problem = CalibrationProblem(curve, weight_mode=args.weights, model=args.model)
    try:
        result = calibrate(problem)
    except NoConvergence as exc:
        bio.dump_json(exc.result.as_dict(), args.out)
        raise
    bio.dump_json(result.as_dict(), args.out)
    return 0


def cmd_report(args) -> int:
    if args.result:
        result = CalibrationResult.from_dict(bio.load_json(args.result))
        if not result.converged:
            raise NumericalError("calibration result did not converge")
    else:
        params = _params_from(args)
        result = CalibrationResult(params, 0.0, 0, True, (), (), args.ratio)
    rep = report(result, args.daily_vol, args.ratio)
    bio.dump_json(rep.as_dict(), args.out)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(rep.summary)
    else:
        sys.stdout.write(rep.summary)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "curve": cmd_curve,
    "theory": cmd_theory,
    "calibrate": cmd_calibrate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.save_config:
            save_config(args, args.save_config)
        return COMMANDS[args.command](args)
    except BlackBandError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: exit={exc.exit_code} kind={type(exc).__name__} msg={msg}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
