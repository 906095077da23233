"""Hot inner loops with numba-compiled and pure-numpy variants.

The active backend is chosen at import time: set ``EVPREP_NO_NUMBA=1`` to
force the pure-numpy fallback (or if numba is not importable). Both
backends are bit-for-bit equivalent; the benchmark CLI compares their
throughput.
"""

import math
import os

import numpy as np

_want_numba = os.environ.get("EVPREP_NO_NUMBA", "0") not in ("1", "true", "yes")

if _want_numba:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def _histogram_py(t, x, y, p, seg_start, seg_duration, num_bins, counts):
    # flat index: ((p_idx * B + tau) * H + y) * W + x, accumulated via bincount
    _, _, height, width = counts.shape
    rel = t - seg_start
    tau = (rel * num_bins) // seg_duration
    np.minimum(tau, num_bins - 1, out=tau)
    p_idx = (p.astype(np.int64) + 1) >> 1
    flat = ((p_idx * num_bins + tau) * height + y.astype(np.int64)) * width + x.astype(
        np.int64
    )
    counts += np.bincount(flat, minlength=counts.size).reshape(counts.shape)


def _per_event_decay_py(frame, last_t, t, x, y, p, alpha, threshold):
    for j in range(t.shape[0]):
        xi = x[j]
        yi = y[j]
        dt = (t[j] - last_t[yi, xi]) * 1e-6
        frame[yi, xi] = math.exp(-alpha * dt) * frame[yi, xi] + p[j] * threshold
        last_t[yi, xi] = t[j]


if HAVE_NUMBA:

    @njit(cache=True)
    def _histogram_nb(t, x, y, p, seg_start, seg_duration, num_bins, counts):
        for j in range(t.shape[0]):
            rel = t[j] - seg_start
            tau = (rel * num_bins) // seg_duration
            if tau >= num_bins:
                tau = num_bins - 1
            p_idx = (p[j] + 1) >> 1
            counts[p_idx, tau, y[j], x[j]] += 1

    @njit(cache=True)
    def _per_event_decay_nb(frame, last_t, t, x, y, p, alpha, threshold):
        for j in range(t.shape[0]):
            xi = x[j]
            yi = y[j]
            dt = (t[j] - last_t[yi, xi]) * 1e-6
            frame[yi, xi] = math.exp(-alpha * dt) * frame[yi, xi] + p[j] * threshold
            last_t[yi, xi] = t[j]

    histogram_fill = _histogram_nb
    per_event_decay_fill = _per_event_decay_nb
else:
    histogram_fill = _histogram_py
    per_event_decay_fill = _per_event_decay_py

# both variants always importable so the benchmark can compare them
histogram_fill_numpy = _histogram_py
per_event_decay_fill_numpy = _per_event_decay_py
