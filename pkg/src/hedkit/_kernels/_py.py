"""Pure-numpy kernel fallback.

Mirrors the semantics of the compiled module `_core` exactly; selected at
import time when the extension is unavailable (or HEDKIT_PURE_PY is set).
"""

import numpy as np


def frame_analyze(samples, frame_len, hop_len, min_lag, max_lag,
                  sample_rate, voicing_threshold):
    """Per-frame RMS energy and NCCF pitch over a mono signal.

    Frames start every `hop_len` samples; only full frames are analyzed.
    Pitch search runs over lags [min_lag, max_lag] of the mean-removed
    frame using the normalized cross-correlation function; the smallest-lag
    local maximum within 5% of the best candidate wins (guards against
    period-multiple picks), refined by parabolic interpolation. Frames with
    no candidate above `voicing_threshold` get f0 = 0.

    Returns (f0, energy) float64 arrays, one entry per frame.
    """
    x = np.ascontiguousarray(samples, dtype=np.float64)
    n = x.shape[0]
    n_frames = (n - frame_len) // hop_len + 1
    f0 = np.zeros(n_frames)
    energy = np.zeros(n_frames)
    # interpolation needs a neighbor on each side of the peak
    lag_lo = max(min_lag, 2)
    lag_hi = min(max_lag, frame_len - 2)

    for i in range(n_frames):
        frame = x[i * hop_len:i * hop_len + frame_len]
        energy[i] = np.sqrt(np.mean(frame * frame))
        if lag_lo + 1 > lag_hi - 1:
            continue
        y = frame - np.mean(frame)
        sq = y * y
        total = np.sum(sq)
        if total < 1e-14:
            continue
        lags = np.arange(lag_lo - 1, lag_hi + 2)
        corr = np.correlate(y, y, mode="full")[frame_len - 1 + lags]
        cs = np.cumsum(sq)
        e_head = cs[frame_len - 1 - lags]
        e_tail = cs[-1] - cs[lags - 1]
        denom = np.sqrt(e_head * e_tail)
        nccf = np.where(denom > 0.0, corr / np.where(denom > 0.0, denom, 1.0), 0.0)

        f0[i] = _pick_f0(nccf, lag_lo, sample_rate, voicing_threshold)
    return f0, energy


def _pick_f0(nccf, lag_lo, sample_rate, threshold):
    """Candidate selection + parabolic refinement on an NCCF slice.

    `nccf[k]` is the value at lag `lag_lo - 1 + k`; the slice carries one
    extra point on each side of the search range.
    """
    inner = nccf[1:-1]
    is_peak = (inner > nccf[:-2]) & (inner >= nccf[2:]) & (inner >= threshold)
    idx = np.nonzero(is_peak)[0]
    if idx.size == 0:
        return 0.0
    best = float(np.max(inner[idx]))
    chosen = -1
    for k in idx:
        if inner[k] >= 0.95 * best:
            chosen = int(k)
            break
    k = chosen + 1  # back to slice coordinates
    y0, y1, y2 = nccf[k - 1], nccf[k], nccf[k + 1]
    denom = y0 - 2.0 * y1 + y2
    delta = 0.0 if denom == 0.0 else 0.5 * (y0 - y2) / denom
    delta = min(1.0, max(-1.0, delta))
    lag = (lag_lo + chosen) + delta
    return sample_rate / lag


def dtw_table(cost):
    """Accumulated-cost table for monotone DTW with steps (1,1),(1,0),(0,1).

    out[i, j] = cost[i, j] + min(out[i-1, j-1], out[i-1, j], out[i, j-1]).
    The row recurrence is inherently sequential, hence the Python loop; the
    compiled kernel exists because of this function.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    ta, tb = cost.shape
    out = np.empty((ta, tb))
    out[0] = np.cumsum(cost[0])
    prev = out[0].tolist()
    for i in range(1, ta):
        row_c = cost[i].tolist()
        cur = [0.0] * tb
        cur[0] = prev[0] + row_c[0]
        for j in range(1, tb):
            m = prev[j - 1]
            if prev[j] < m:
                m = prev[j]
            if cur[j - 1] < m:
                m = cur[j - 1]
            cur[j] = row_c[j] + m
        out[i] = cur
        prev = cur
    return out
