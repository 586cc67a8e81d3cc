"""CSV and JSON readers/writers for prices, curves, fits and reports.

Floats are written as their shortest round-trip decimal (``repr``), so a
value read back is bit-identical to the value written. Missing statistics
are blank in CSV and ``null`` in JSON.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .empirics import CurveEntry, PredictabilityCurve
from .errors import DataError
from .series import KINDS, PriceSeries, infer_frequency

PRICE_HEADER = ("date", "symbol", "price")
CURVE_FIELDS = (
    "tau_lt_native", "tau_lt_years", "n_raw", "n_kept", "slope", "slope_se",
    "c0", "c1", "c2", "c3", "se0", "se1", "se2", "se3", "status",
)
PATH_HEADER = ("path_id", "step", "t_years", "pi")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


def dump_json(obj, path) -> None:
    text = json.dumps(_jsonable(obj), indent=2, allow_nan=False)
    Path(path).write_text(text + "\n")


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from exc


# -- prices -------------------------------------------------------------------


def ingest_csv(path) -> list[PriceSeries]:
    """Read ``date,symbol,price`` rows into one PriceSeries per symbol.

    An optional fourth ``kind`` column (spot|future) is honoured. Rows may
    come in any order; symbols keep their order of first appearance.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    rows = OrderedDict()
    kinds = {}
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip().lower() for h in header]
        if tuple(header[:3]) != PRICE_HEADER or len(header) > 4 or (
            len(header) == 4 and header[3] != "kind"
        ):
            raise DataError(f"{path}:1: expected header date,symbol,price[,kind]")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                date = _dt.date.fromisoformat(row[0].strip())
                price = float(row[2])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            symbol = row[1].strip()
            if not symbol:
                raise DataError(f"{path}:{lineno}: empty symbol")
            if not (price > 0 and math.isfinite(price)):
                raise DataError(f"{path}:{lineno}: price must be positive, got {row[2]!r}")
            if len(header) == 4:
                kind = row[3].strip()
                if kind not in KINDS or kinds.setdefault(symbol, kind) != kind:
                    raise DataError(f"{path}:{lineno}: bad or inconsistent kind {kind!r}")
            rows.setdefault(symbol, []).append((date, price, lineno))
    if not rows:
        raise DataError(f"{path}: no data rows")

    out = []
    for symbol, obs in rows.items():
        obs.sort(key=lambda r: r[0])
        for prev, cur in zip(obs, obs[1:]):
            if prev[0] == cur[0]:
                raise DataError(f"{path}:{cur[2]}: duplicate date {cur[0]} for {symbol}")
        dates = np.array([o[0] for o in obs], dtype="datetime64[D]")
        prices = np.array([o[1] for o in obs])
        if dates.size >= 2:
            try:
                frequency = infer_frequency(dates)
            except DataError as exc:
                raise DataError(f"{path}: {symbol}: {exc}") from None
        else:
            frequency = "daily"
        out.append(PriceSeries.from_prices(symbol, dates, prices, frequency, kinds.get(symbol, "future")))
    return out


def write_prices(pool, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PRICE_HEADER) + "\n")
        for s in pool:
            prefix = [f"{d},{s.symbol}," for d in s.dates.astype(str)]
            fh.write("".join(f"{a}{p!r}\n" for a, p in zip(prefix, s.prices.tolist())))


def write_paths(paths, path) -> None:
    """Dump simulated paths as (path_id, step, t_years, pi) rows."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(PATH_HEADER) + "\n")
        for p in paths:
            rows = enumerate(zip(p.times.tolist(), p.pi.tolist()))
            fh.write("".join(f"{p.path_id},{k},{t!r},{v!r}\n" for k, (t, v) in rows))


# -- curves -------------------------------------------------------------------


def _entry_row(e: CurveEntry) -> dict:
    row = {
        "tau_lt_native": e.tau_lt,
        "tau_lt_years": e.tau_lt_years,
        "n_raw": e.n_pairs_raw,
        "n_kept": e.n_pairs_kept,
        "slope": e.slope,
        "slope_se": e.slope_stderr,
    }
    row.update({f"c{i}": c for i, c in enumerate(e.cubic)})
    row.update({f"se{i}": c for i, c in enumerate(e.cubic_stderrs)})
    row["status"] = e.status
    return row


def write_curve_csv(curve: PredictabilityCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CURVE_FIELDS) + "\n")
        for e in curve.entries:
            row = _entry_row(e)
            fh.write(",".join(fmt(row[k]) for k in CURVE_FIELDS) + "\n")


def curve_to_dict(curve: PredictabilityCurve) -> dict:
    return {
        "frequency": curve.frequency,
        "ratio": curve.ratio,
        "T": curve.T if math.isfinite(curve.T) else None,
        "entries": [_entry_row(e) for e in curve.entries],
    }


def write_curve_json(curve: PredictabilityCurve, path) -> None:
    dump_json(curve_to_dict(curve), path)


def _num(v, cast=float):
    if v is None or v == "":
        return math.nan if cast is float else 0
    return cast(v)


def _entry_from_row(row: dict, ratio: float) -> CurveEntry:
    tau = int(_num(row["tau_lt_native"], float))
    return CurveEntry(
        tau_lt=tau,
        tau_lt_years=_num(row["tau_lt_years"]),
        tau_gt=int(round(ratio * tau)),
        n_pairs_raw=int(_num(row["n_raw"], float)),
        n_pairs_kept=int(_num(row["n_kept"], float)),
        slope=_num(row["slope"]),
        slope_stderr=_num(row["slope_se"]),
        cubic=tuple(_num(row[f"c{i}"]) for i in range(4)),
        cubic_stderrs=tuple(_num(row[f"se{i}"]) for i in range(4)),
        status=row.get("status") or ("empty" if row["slope"] in ("", None) else "ok"),
    )


def read_curve(path, ratio: float = 0.2, frequency: str = "daily", T: float = 20.0) -> PredictabilityCurve:
    """Load a curve from JSON (self-describing) or CSV (``ratio``, ``frequency``, ``T`` supplied)."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            d = load_json(path)
            entries = tuple(_entry_from_row(r, d["ratio"]) for r in d["entries"])
            T = d.get("T", 20.0)
            return PredictabilityCurve(entries, d["frequency"], d["ratio"], math.inf if T is None else T)
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: cannot read curve: {exc}") from exc
    try:
        entries = tuple(_entry_from_row(r, ratio) for r in rows)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: bad curve row: {exc}") from exc
    return PredictabilityCurve(entries, frequency, ratio, T)
