"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--paths 200] [--years 50] [--repeat 3]

Compilation is excluded (one warm-up call per kernel). Results are checked
for agreement before any timing is reported.
"""

import argparse
import time

import numpy as np

from blackband import _accel
from blackband.model import FUTURES
from blackband.sim import SimConfig, _cholesky2, simulate_array, stationary_covariance, transition


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--paths", type=int, default=200)
    ap.add_argument("--years", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba unavailable (or BLACKBAND_DISABLE_NUMBA set): nothing to compare")

    params = FUTURES.with_sigma2(0.2016)
    n = args.years * 252
    F, Qd = transition(params, 1 / 252)
    L = _cholesky2(Qd)
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((args.paths, 2)) @ _cholesky2(stationary_covariance(params)).T
    Z = rng.standard_normal((args.paths, n - 1, 2))
    lags = np.array([1, 25, 126, 252, 504, 1260])

    paths = {}
    for flag in (True, False):
        paths[flag] = _accel.propagate(x0, F, L, Z, 0, n, use_numba=flag)
    assert np.array_equal(paths[True], paths[False])
    lp = {flag: _accel.lagged_products(paths[True], lags, use_numba=flag) for flag in (True, False)}
    assert np.allclose(lp[True], lp[False], rtol=1e-12)

    cfg = SimConfig(params, 1 / 252, n, n_paths=args.paths, seed=0)
    simulate_array(SimConfig(params, 1 / 252, 10, n_paths=2), use_numba=True)

    rows = [
        ("propagate", lambda f: _accel.propagate(x0, F, L, Z, 0, n, use_numba=f)),
        ("lagged_products", lambda f: _accel.lagged_products(paths[True], lags, use_numba=f)),
        ("simulate_array (incl. RNG)", lambda f: simulate_array(cfg, use_numba=f)),
    ]
    print(f"{args.paths} paths x {n} daily steps, best of {args.repeat}, threads={_accel.set_threads(None)}")
    print(f"{'kernel':<28}{'numba s':>10}{'numpy s':>10}{'speed-up':>10}")
    for name, fn in rows:
        t_fast = best_of(lambda: fn(True), args.repeat)
        t_slow = best_of(lambda: fn(False), args.repeat)
        print(f"{name:<28}{t_fast:>10.3f}{t_slow:>10.3f}{t_slow / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
