"""Hot inner loops, compiled with numba when available.

Set ``BLACKBAND_DISABLE_NUMBA=1`` to force the pure-numpy path. The two
``propagate`` paths perform the same floating-point operations in the same
order and agree bit for bit; ``lagged_products`` sums in a different order
and agrees to rounding.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("BLACKBAND_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by BLACKBAND_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    # The bundled TBB is too old for numba and only produces a warning.
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def set_threads(n: int | None) -> int:
    """Bound kernel parallelism; returns the thread count actually used."""
    if not HAVE_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if n is None else max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n


# -- pure numpy ---------------------------------------------------------------


def _propagate_numpy(x0, F, L, Z, burn_in, out):
    f00, f01, f11 = F[0, 0], F[0, 1], F[1, 1]
    l00, l10, l11 = L[0, 0], L[1, 0], L[1, 1]
    p = x0[:, 0].copy()
    m = x0[:, 1].copy()
    n_rec = out.shape[1]
    if burn_in == 0:
        out[:, 0] = p
    for k in range(Z.shape[1]):
        z0 = Z[:, k, 0]
        z1 = Z[:, k, 1]
        p_new = f00 * p + f01 * m + l00 * z0
        m = f11 * m + (l10 * z0 + l11 * z1)
        p = p_new
        j = k + 1 - burn_in
        if 0 <= j < n_rec:
            out[:, j] = p
    return out


def _lagged_products_numpy(paths, lags, out):
    n = paths.shape[1]
    for j in range(lags.shape[0]):
        lag = lags[j]
        out[:, j] = np.sum(paths[:, : n - lag] * paths[:, lag:], axis=1) / (n - lag)
    return out


# -- numba --------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _propagate_numba(x0, F, L, Z, burn_in, out):
        f00, f01, f11 = F[0, 0], F[0, 1], F[1, 1]
        l00, l10, l11 = L[0, 0], L[1, 0], L[1, 1]
        n_rec = out.shape[1]
        for i in prange(Z.shape[0]):
            p = x0[i, 0]
            m = x0[i, 1]
            if burn_in == 0:
                out[i, 0] = p
            for k in range(Z.shape[1]):
                z0 = Z[i, k, 0]
                z1 = Z[i, k, 1]
                p_new = f00 * p + f01 * m + l00 * z0
                m = f11 * m + (l10 * z0 + l11 * z1)
                p = p_new
                j = k + 1 - burn_in
                if j >= 0 and j < n_rec:
                    out[i, j] = p
        return out

    @njit(parallel=True, cache=True)
    def _lagged_products_numba(paths, lags, out):
        n = paths.shape[1]
        for i in prange(paths.shape[0]):
            for j in range(lags.shape[0]):
                lag = lags[j]
                acc = 0.0
                for t in range(n - lag):
                    acc += paths[i, t] * paths[i, t + lag]
                out[i, j] = acc / (n - lag)
        return out


def propagate(x0, F, L, Z, burn_in, n_record, *, use_numba=None):
    """Run x_{k+1} = F x_k + L z_k for every path; record pi after burn-in.

    ``x0`` is (n_paths, 2), ``Z`` is (n_paths, n_transitions, 2) with
    ``n_transitions = burn_in + n_record - 1``. Returns (n_paths, n_record).
    """
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    F = np.ascontiguousarray(F, dtype=np.float64)
    L = np.ascontiguousarray(L, dtype=np.float64)
    if Z.shape[1] != burn_in + n_record - 1:
        raise ValueError("noise length does not match burn_in + n_record - 1")
    out = np.empty((x0.shape[0], n_record), dtype=np.float64)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _propagate_numba(x0, F, L, Z, int(burn_in), out)
    return _propagate_numpy(x0, F, L, Z, int(burn_in), out)


def lagged_products(paths, lags, *, use_numba=None):
    """Per-path mean of pi_t * pi_{t+lag}; returns (n_paths, n_lags).

    Lags are in steps. Assumes a known zero mean, so nothing is subtracted.
    """
    paths = np.ascontiguousarray(paths, dtype=np.float64)
    lags = np.ascontiguousarray(lags, dtype=np.int64)
    if np.any(lags < 0) or np.any(lags >= paths.shape[1]):
        raise ValueError("lags must lie in [0, path length)")
    out = np.empty((paths.shape[0], lags.shape[0]), dtype=np.float64)
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _lagged_products_numba(paths, lags, out)
    return _lagged_products_numpy(paths, lags, out)
