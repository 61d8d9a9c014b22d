"""Frame-level audio analysis and per-segment prosodic feature vectors.

A fixed 24-dimensional statistic set over f0/energy tracks stands in for
the full 88-dim eGeMAPS-style feature bank; externally computed vectors of
any dimension can be imported from CSV instead (`load_external_features`),
since the downstream rankers are dimension-agnostic.
"""

from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptySegment, FormatError, InvalidInput, UnsupportedFormat

# pitch search range (Hz) and NCCF voicing threshold
F0_MIN_HZ = 60.0
F0_MAX_HZ = 500.0
VOICING_THRESHOLD = 0.3

DEFAULT_FRAME_S = 0.040
DEFAULT_HOP_S = 0.010

# floor before log so silent frames stay finite
ENERGY_FLOOR = 1e-8

FEATURE_LABELS = (
    "f0_mean_log",
    "f0_std_log",
    "f0_min_log",
    "f0_max_log",
    "f0_slope_log",
    "voiced_ratio",
    "energy_mean_log",
    "energy_std_log",
    "energy_min_log",
    "energy_max_log",
    "energy_slope_log",
    "duration_s",
    "f0_range_log",
    "f0_median_log",
    "f0_p10_log",
    "f0_p90_log",
    "f0_delta_mean_log",
    "energy_range_log",
    "energy_median_log",
    "energy_p10_log",
    "energy_p90_log",
    "energy_delta_mean_log",
    "frame_count",
    "voiced_run_mean",
)
FEATURE_DIM = len(FEATURE_LABELS)


@dataclass(frozen=True)
class AudioClip:
    """Mono audio: samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidInput(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(
            self, "samples", np.asarray(self.samples, dtype=np.float64))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class FrameTrack:
    """Per-frame f0 (Hz, 0 = unvoiced) and RMS energy (linear)."""

    f0: np.ndarray
    energy: np.ndarray
    hop_s: float
    frame_s: float

    def __post_init__(self):
        f0 = np.asarray(self.f0, dtype=np.float64)
        energy = np.asarray(self.energy, dtype=np.float64)
        if f0.shape != energy.shape:
            raise InvalidInput("f0 and energy must have equal length")
        if np.any(f0 < 0) or np.any(energy < 0):
            raise InvalidInput("f0 and energy must be non-negative")
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "energy", energy)

    def __len__(self) -> int:
        return len(self.f0)

    def frame_times(self) -> np.ndarray:
        """Center time of each frame, in seconds."""
        return np.arange(len(self.f0)) * self.hop_s + self.frame_s / 2.0


@dataclass(frozen=True)
class SegmentFeatures:
    """Fixed-length feature vector for one time segment."""

    values: np.ndarray
    dim_labels: tuple = field(default=FEATURE_LABELS)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or len(values) != len(self.dim_labels):
            raise InvalidInput(
                f"feature vector length {values.shape} does not match "
                f"{len(self.dim_labels)} labels")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("feature values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dim_labels", tuple(self.dim_labels))

    @property
    def dim(self) -> int:
        return len(self.values)


def analyze(clip: AudioClip, frame_s: float = DEFAULT_FRAME_S,
            hop_s: float = DEFAULT_HOP_S) -> FrameTrack:
    """Framewise f0/energy analysis of a clip.

    f0 uses normalized autocorrelation over 60-500 Hz with parabolic peak
    interpolation; frames whose best normalized peak falls below 0.3 are
    unvoiced (f0 = 0). Energy is the plain RMS of each frame. Deterministic:
    identical clips yield bitwise-identical tracks.
    """
    if len(clip.samples) == 0:
        raise InvalidInput("cannot analyze an empty clip")
    if not 0 < hop_s <= frame_s:
        raise InvalidInput(f"need 0 < hop_s <= frame_s, got {hop_s}, {frame_s}")
    frame_len = int(round(frame_s * clip.sample_rate))
    hop_len = max(1, int(round(hop_s * clip.sample_rate)))
    if frame_len > len(clip.samples):
        raise InvalidInput(
            f"frame of {frame_len} samples exceeds clip of {len(clip.samples)}")
    min_lag = int(round(clip.sample_rate / F0_MAX_HZ))
    max_lag = int(round(clip.sample_rate / F0_MIN_HZ))
    f0, energy = _kernels.frame_analyze(
        clip.samples, frame_len, hop_len, min_lag, max_lag,
        float(clip.sample_rate), VOICING_THRESHOLD)
    return FrameTrack(f0=f0, energy=energy, hop_s=hop_len / clip.sample_rate,
                      frame_s=frame_len / clip.sample_rate)


def _slope(t: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of y against t; 0 when underdetermined."""
    if len(t) < 2:
        return 0.0
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        return 0.0
    return float(np.dot(tc, y - y.mean()) / denom)


def _run_lengths(mask: np.ndarray) -> list:
    runs = []
    count = 0
    for flag in mask:
        if flag:
            count += 1
        elif count:
            runs.append(count)
            count = 0
    if count:
        runs.append(count)
    return runs


def extract_segment_features(track: FrameTrack, start_s: float,
                             end_s: float) -> SegmentFeatures:
    """Statistics over the frames whose centers fall in [start_s, end_s).

    f0 statistics are computed in log-Hz over voiced frames only; fully
    unvoiced segments yield zeros there (never NaN). Energy statistics are
    log-domain over all frames, floored at ENERGY_FLOOR.
    """
    if not 0 <= start_s < end_s:
        raise InvalidInput(f"bad segment bounds [{start_s}, {end_s})")
    times = track.frame_times()
    mask = (times >= start_s) & (times < end_s)
    if not np.any(mask):
        raise EmptySegment(
            f"segment [{start_s:.3f}, {end_s:.3f}) overlaps no frame")
    t = times[mask]
    f0 = track.f0[mask]
    energy = track.energy[mask]

    voiced = f0 > 0
    vals = np.zeros(FEATURE_DIM)
    if np.any(voiced):
        logf0 = np.log(f0[voiced])
        tv = t[voiced]
        vals[0] = logf0.mean()
        vals[1] = logf0.std()
        vals[2] = logf0.min()
        vals[3] = logf0.max()
        vals[4] = _slope(tv, logf0)
        vals[12] = logf0.max() - logf0.min()
        vals[13] = np.median(logf0)
        vals[14] = np.percentile(logf0, 10)
        vals[15] = np.percentile(logf0, 90)
        if len(logf0) > 1:
            vals[16] = np.abs(np.diff(logf0)).mean()
    vals[5] = voiced.mean()

    loge = np.log(np.maximum(energy, ENERGY_FLOOR))
    vals[6] = loge.mean()
    vals[7] = loge.std()
    vals[8] = loge.min()
    vals[9] = loge.max()
    vals[10] = _slope(t, loge)
    vals[11] = end_s - start_s
    vals[17] = loge.max() - loge.min()
    vals[18] = np.median(loge)
    vals[19] = np.percentile(loge, 10)
    vals[20] = np.percentile(loge, 90)
    if len(loge) > 1:
        vals[21] = np.abs(np.diff(loge)).mean()
    vals[22] = float(len(t))
    runs = _run_lengths(voiced)
    vals[23] = float(np.mean(runs)) if runs else 0.0
    return SegmentFeatures(values=vals)


def load_external_features(path) -> dict:
    """Read a feature CSV (`segment_id,f000,...`) into SegmentFeatures.

    The dimension is inferred from the header; every row must match it and
    contain only finite values.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[0] != "segment_id":
            raise FormatError(
                f"{path}: header must be 'segment_id,f000,...', got {header[:3]}")
        labels = tuple(header[1:])
        out = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            try:
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            out[row[0]] = SegmentFeatures(values=np.array(values), dim_labels=labels)
    return out


def read_wav(path) -> AudioClip:
    """Read a 16-bit PCM mono WAV; samples scaled by 1/32768.

    Any sample rate is accepted and carried through unchanged (no
    resampling). Stereo, compressed, or non-16-bit files are rejected.
    """
    try:
        with wave.open(str(path), "rb") as wav:
            if wav.getcomptype() != "NONE":
                raise UnsupportedFormat(f"{path}: compressed WAV not supported")
            if wav.getnchannels() != 1:
                raise UnsupportedFormat(
                    f"{path}: expected mono, got {wav.getnchannels()} channels")
            if wav.getsampwidth() != 2:
                raise UnsupportedFormat(
                    f"{path}: expected 16-bit samples, got "
                    f"{8 * wav.getsampwidth()}-bit")
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except wave.Error as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from None
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioClip(samples=samples, sample_rate=rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono WAV (inverse of read_wav)."""
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate)
        wav.writeframes(pcm.tobytes())
