# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: NCCF frame analysis and DTW accumulation.

Semantics match `_py` (the numpy fallback); keep the two in sync.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def frame_analyze(samples, Py_ssize_t frame_len, Py_ssize_t hop_len,
                  Py_ssize_t min_lag, Py_ssize_t max_lag,
                  double sample_rate, double voicing_threshold):
    """Per-frame RMS energy and NCCF pitch; see _py.frame_analyze."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(
        samples, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_frames = (n - frame_len) // hop_len + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f0 = np.zeros(n_frames)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] energy = np.zeros(n_frames)
    cdef Py_ssize_t lag_lo = min_lag if min_lag > 2 else 2
    cdef Py_ssize_t lag_hi = max_lag if max_lag < frame_len - 2 else frame_len - 2
    cdef Py_ssize_t n_lags = lag_hi - lag_lo + 3  # one guard point each side

    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.empty(frame_len)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cs = np.empty(frame_len)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nccf = np.empty(max(n_lags, 1))

    cdef Py_ssize_t i, t, k, start, lag, chosen
    cdef double mean, acc, total, num, e_head, e_tail, denom
    cdef double best, y0, y1, y2, pdenom, delta, lag_f

    for i in range(n_frames):
        start = i * hop_len
        acc = 0.0
        for t in range(frame_len):
            acc += x[start + t] * x[start + t]
        energy[i] = (acc / frame_len) ** 0.5
        if lag_lo + 1 > lag_hi - 1:
            continue
        mean = 0.0
        for t in range(frame_len):
            mean += x[start + t]
        mean /= frame_len
        total = 0.0
        for t in range(frame_len):
            y[t] = x[start + t] - mean
            total += y[t] * y[t]
            cs[t] = total
        if total < 1e-14:
            continue

        for k in range(n_lags):
            lag = lag_lo - 1 + k
            num = 0.0
            for t in range(frame_len - lag):
                num += y[t] * y[t + lag]
            e_head = cs[frame_len - 1 - lag]
            e_tail = total - cs[lag - 1]
            denom = (e_head * e_tail) ** 0.5
            nccf[k] = num / denom if denom > 0.0 else 0.0

        # smallest-lag local maximum within 5% of the best candidate
        best = -2.0
        for k in range(1, n_lags - 1):
            if (nccf[k] > nccf[k - 1] and nccf[k] >= nccf[k + 1]
                    and nccf[k] >= voicing_threshold):
                if nccf[k] > best:
                    best = nccf[k]
        if best < voicing_threshold:
            continue
        chosen = -1
        for k in range(1, n_lags - 1):
            if (nccf[k] > nccf[k - 1] and nccf[k] >= nccf[k + 1]
                    and nccf[k] >= voicing_threshold
                    and nccf[k] >= 0.95 * best):
                chosen = k
                break
        if chosen < 0:
            continue
        y0 = nccf[chosen - 1]
        y1 = nccf[chosen]
        y2 = nccf[chosen + 1]
        pdenom = y0 - 2.0 * y1 + y2
        delta = 0.0 if pdenom == 0.0 else 0.5 * (y0 - y2) / pdenom
        if delta > 1.0:
            delta = 1.0
        elif delta < -1.0:
            delta = -1.0
        lag_f = (lag_lo + chosen - 1) + delta
        f0[i] = sample_rate / lag_f

    return f0, energy


def dtw_table(cost):
    """Accumulated-cost DTW table; see _py.dtw_table."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(
        cost, dtype=np.float64)
    cdef Py_ssize_t ta = c.shape[0]
    cdef Py_ssize_t tb = c.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((ta, tb))
    cdef Py_ssize_t i, j
    cdef double m

    out[0, 0] = c[0, 0]
    for j in range(1, tb):
        out[0, j] = out[0, j - 1] + c[0, j]
    for i in range(1, ta):
        out[i, 0] = out[i - 1, 0] + c[i, 0]
        for j in range(1, tb):
            m = out[i - 1, j - 1]
            if out[i - 1, j] < m:
                m = out[i - 1, j]
            if out[i, j - 1] < m:
                m = out[i, j - 1]
            out[i, j] = c[i, j] + m
    return out
