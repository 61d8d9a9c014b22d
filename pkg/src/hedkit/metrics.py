"""Objective evaluation: MCD, pitch/energy distortion, frame disturbance.

All metrics align the two sequences with monotone DTW first (steps
diagonal, down, right), so sequences of different lengths compare
sensibly. The pseudo-cepstra map lets MCD run on rendered contours
without a spectral decoder in the loop.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from . import _kernels as kernels
from .errors import DimError, InvalidInput
from .renderer import ProsodyContour, expand_contour
from .signal import FrameTrack

CEPSTRA_DIM = 13

MCD_SCALE = 10.0 / np.log(10.0)


def dtw(cost: np.ndarray):
    """Minimal-cost monotone alignment of a Ta x Tb cost matrix.

    Returns (path, total_cost). Path steps are (1,1), (1,0) or (0,1);
    backtracking ties prefer the diagonal, then advancing the first
    sequence, then the second.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise InvalidInput("cost matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(cost)):
        raise InvalidInput("cost matrix must be finite")
    table = kernels.dtw_table(cost)
    i, j = cost.shape[0] - 1, cost.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = table[i - 1, j - 1]
            up = table[i - 1, j]
            left = table[i, j - 1]
            best = min(diag, up, left)
            if diag == best:
                i, j = i - 1, j - 1
            elif up == best:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return path, float(table[-1, -1])


def frame_disturbance(path) -> float:
    """RMS deviation of an alignment path from the diagonal."""
    ij = np.asarray(path, dtype=np.float64)
    return float(np.sqrt(np.mean((ij[:, 0] - ij[:, 1]) ** 2)))


def _pairwise_euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def mcd(a: np.ndarray, b: np.ndarray) -> float:
    """Mel-cepstral distortion in dB, c0 excluded by convention.

    Sequences are T x D (c1..cD already, no energy coefficient); they are
    DTW-aligned on Euclidean distance, then
    MCD = (10/ln10) * mean over the path of sqrt(2 * sum_d (c_d - c'_d)^2).
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimError(f"cepstra widths differ: {a.shape[1]} vs {b.shape[1]}")
    if a.size == 0 or b.size == 0:
        raise InvalidInput("cepstra must be non-empty")
    path, _ = dtw(_pairwise_euclidean(a, b))
    ij = np.asarray(path)
    sq = np.sum((a[ij[:, 0]] - b[ij[:, 1]]) ** 2, axis=1)
    return float(MCD_SCALE * np.mean(np.sqrt(2.0 * sq)))


def pitch_energy_distortion(a: FrameTrack, b: FrameTrack):
    """(pitch_rmse_hz, energy_rmse) after joint (f0, energy) DTW alignment.

    Pitch RMSE covers only path positions where both frames are voiced;
    when no such position exists it is None. Energy RMSE covers the whole
    path.
    """
    fa = np.column_stack([a.f0, a.energy])
    fb = np.column_stack([b.f0, b.energy])
    if fa.size == 0 or fb.size == 0:
        raise InvalidInput("tracks must be non-empty")
    path, _ = dtw(_pairwise_euclidean(fa, fb))
    ij = np.asarray(path)
    ai, bj = ij[:, 0], ij[:, 1]
    energy_rmse = float(np.sqrt(np.mean((a.energy[ai] - b.energy[bj]) ** 2)))
    voiced = (a.f0[ai] > 0) & (b.f0[bj] > 0)
    if not np.any(voiced):
        return None, energy_rmse
    pitch_rmse = float(np.sqrt(np.mean(
        (a.f0[ai][voiced] - b.f0[bj][voiced]) ** 2)))
    return pitch_rmse, energy_rmse


def _cepstra_basis() -> np.ndarray:
    # fixed, closed-form mixing matrix: every row depends on both pitch
    # and energy so any per-frame change is visible in the output
    d = np.arange(1, CEPSTRA_DIM + 1, dtype=np.float64)
    return np.column_stack([np.cos(0.7 * d), np.sin(0.4 * d) + 0.1])


_CEPSTRA_BASIS = _cepstra_basis()


def cepstra_from_contour(c: ProsodyContour) -> np.ndarray:
    """Pseudo-cepstra (T x 13) from the frame-expanded contour.

    A fixed linear map of the per-frame (pitch log-Hz, log-energy) pair;
    purely a deterministic stand-in so the MCD pipeline has input without
    a spectral model.
    """
    pitch, energy = expand_contour(c)
    frames = np.column_stack([pitch, energy])
    return frames @ _CEPSTRA_BASIS.T


def contour_metrics(pred: ProsodyContour, ref: ProsodyContour) -> dict:
    """The Table-2 column set for one rendered-vs-reference contour pair."""
    pred_pitch, pred_energy = expand_contour(pred)
    ref_pitch, ref_energy = expand_contour(ref)
    pred_track = FrameTrack(f0=np.exp(pred_pitch), energy=np.exp(pred_energy),
                            hop_s=pred.hop_s, frame_s=pred.hop_s)
    ref_track = FrameTrack(f0=np.exp(ref_pitch), energy=np.exp(ref_energy),
                           hop_s=ref.hop_s, frame_s=ref.hop_s)
    pitch_rmse, energy_rmse = pitch_energy_distortion(pred_track, ref_track)
    path, _ = dtw(_pairwise_euclidean(
        np.column_stack([pred_pitch, pred_energy]),
        np.column_stack([ref_pitch, ref_energy])))
    return {
        "mcd": mcd(cepstra_from_contour(pred), cepstra_from_contour(ref)),
        "pitch_rmse_hz": pitch_rmse,
        "energy_rmse": energy_rmse,
        "fd": frame_disturbance(path),
    }


METRIC_COLUMNS = ("mcd", "pitch_rmse_hz", "energy_rmse", "fd")


def summarize_metrics(per_item: list) -> dict:
    """Corpus mean/std per metric; absent (None) values are skipped."""
    summary = {}
    for col in METRIC_COLUMNS:
        values = [row[col] for row in per_item if row.get(col) is not None]
        if values:
            arr = np.asarray(values, dtype=np.float64)
            summary[col] = {"mean": float(arr.mean()),
                            "std": float(arr.std()),
                            "n": len(values)}
        else:
            summary[col] = {"mean": None, "std": None, "n": 0}
    return summary


def write_metrics_json(path, per_item: list) -> None:
    doc = {"items": per_item, "summary": summarize_metrics(per_item)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_metrics_csv(path, per_item: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("item_id",) + METRIC_COLUMNS)
        for row in per_item:
            writer.writerow([row.get("item_id", "")] + [
                "" if row.get(col) is None else repr(float(row[col]))
                for col in METRIC_COLUMNS])
        summary = summarize_metrics(per_item)
        for stat in ("mean", "std"):
            writer.writerow([stat] + [
                "" if summary[col][stat] is None
                else repr(float(summary[col][stat]))
                for col in METRIC_COLUMNS])
