"""Hierarchical emotion distributions and the phoneme-aligned layout.

An utterance carries one E-dim intensity vector, each word and each phoneme
carries its own, and models consume the per-phoneme concatenation
[utterance ED | owning word ED | phoneme ED].
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .alignment import Segmentation, segment_count
from .errors import EmptySegment, FormatError, InvalidInput, ShapeError
from .ranker import EmotionSet, intensity
from .signal import FrameTrack, extract_segment_features


@dataclass(frozen=True)
class HierarchicalED:
    """Per-segment emotion intensities at the three levels."""

    utterance: np.ndarray
    words: np.ndarray
    phones: np.ndarray
    emotions: EmotionSet = EmotionSet()

    def __post_init__(self):
        utt = np.asarray(self.utterance, dtype=np.float64)
        words = np.atleast_2d(np.asarray(self.words, dtype=np.float64))
        phones = np.atleast_2d(np.asarray(self.phones, dtype=np.float64))
        e = self.emotions.size
        if utt.shape != (e,) or words.shape[1] != e or phones.shape[1] != e:
            raise ShapeError(
                f"level widths must equal {e}: {utt.shape}, {words.shape}, "
                f"{phones.shape}")
        for name, arr in (("utterance", utt), ("words", words), ("phones", phones)):
            if np.any(arr < 0) or np.any(arr > 1):
                raise InvalidInput(f"{name} intensities must lie in [0,1]")
        object.__setattr__(self, "utterance", utt)
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "phones", phones)

    def __eq__(self, other):
        return (isinstance(other, HierarchicalED)
                and self.emotions == other.emotions
                and np.array_equal(self.utterance, other.utterance)
                and np.array_equal(self.words, other.words)
                and np.array_equal(self.phones, other.phones))

    @property
    def n_words(self) -> int:
        return self.words.shape[0]

    @property
    def n_phones(self) -> int:
        return self.phones.shape[0]

    def copy(self) -> "HierarchicalED":
        return HierarchicalED(utterance=self.utterance.copy(),
                              words=self.words.copy(),
                              phones=self.phones.copy(), emotions=self.emotions)


@dataclass(frozen=True)
class PhonemeAlignedED:
    """P x 3E matrix: per phoneme [utterance ED | word ED | phoneme ED]."""

    matrix: np.ndarray
    emotions: EmotionSet = EmotionSet()

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if m.shape[1] != 3 * self.emotions.size:
            raise ShapeError(
                f"expected {3 * self.emotions.size} columns, got {m.shape[1]}")
        object.__setattr__(self, "matrix", m)

    def __eq__(self, other):
        return (isinstance(other, PhonemeAlignedED)
                and self.emotions == other.emotions
                and np.array_equal(self.matrix, other.matrix))


def extract(track: FrameTrack, seg: Segmentation, models: dict,
            emotions: EmotionSet = EmotionSet()) -> HierarchicalED:
    """Score every segment of the utterance with the per-emotion rankers.

    Features are computed over each segment's own time span, so the same
    span always produces the same ED row regardless of level.
    """
    for label in emotions.labels:
        if label not in models:
            raise InvalidInput(f"no ranking model for emotion '{label}'")

    def score(start_s, end_s, what):
        try:
            feats = extract_segment_features(track, start_s, end_s)
        except EmptySegment:
            raise EmptySegment(
                f"{what} [{start_s:.3f}, {end_s:.3f}) overlaps no frame") from None
        return [intensity(models[label], feats) for label in emotions.labels]

    utt = score(seg.utterance_span[0], seg.utterance_span[1], "utterance")
    words = [score(w.start_s, w.end_s, f"word '{w.text}'") for w in seg.words]
    phones = [score(p.start_s, p.end_s, f"phone '{p.symbol}'")
              for p in seg.phones]
    return HierarchicalED(utterance=np.array(utt), words=np.array(words),
                          phones=np.array(phones), emotions=emotions)


def replicate(hed: HierarchicalED, seg: Segmentation) -> PhonemeAlignedED:
    """Copy upper-level EDs down to every phoneme row.

    Column order is fixed: E utterance columns, E word columns, E phoneme
    columns. The utterance block is identical on every row; the word block
    is constant across each word's phones.
    """
    _, n_words, n_phones = segment_count(seg)
    if hed.n_words != n_words or hed.n_phones != n_phones:
        raise ShapeError(
            f"ED has {hed.n_words} words/{hed.n_phones} phones but segmentation "
            f"has {n_words}/{n_phones}")
    e = hed.emotions.size
    matrix = np.empty((n_phones, 3 * e))
    matrix[:, :e] = hed.utterance
    for i, word in enumerate(seg.words):
        lo, hi = word.phone_range
        matrix[lo:hi, e:2 * e] = hed.words[i]
    matrix[:, 2 * e:] = hed.phones
    return PhonemeAlignedED(matrix=matrix, emotions=hed.emotions)


def mean_abs_diff(a: HierarchicalED, b: HierarchicalED) -> dict:
    """Per-level mean absolute difference plus the unweighted level average."""
    if a.emotions != b.emotions:
        raise ShapeError("emotion sets differ")
    if (a.utterance.shape != b.utterance.shape or a.words.shape != b.words.shape
            or a.phones.shape != b.phones.shape):
        raise ShapeError("level shapes differ")
    phones = float(np.abs(a.phones - b.phones).mean())
    words = float(np.abs(a.words - b.words).mean())
    utterance = float(np.abs(a.utterance - b.utterance).mean())
    return {
        "phones": phones,
        "words": words,
        "utterance": utterance,
        "average": (phones + words + utterance) / 3.0,
    }


def hed_to_dict(hed: HierarchicalED) -> dict:
    return {
        "emotions": list(hed.emotions.labels),
        "utterance": [float(v) for v in hed.utterance],
        "words": [[float(v) for v in row] for row in hed.words],
        "phones": [[float(v) for v in row] for row in hed.phones],
    }


def hed_from_dict(doc: dict) -> HierarchicalED:
    try:
        return HierarchicalED(
            utterance=np.array(doc["utterance"], dtype=np.float64),
            words=np.array(doc["words"], dtype=np.float64),
            phones=np.array(doc["phones"], dtype=np.float64),
            emotions=EmotionSet(labels=tuple(doc["emotions"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed hierarchical ED: {exc}") from None


def save_hed(hed: HierarchicalED, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(hed_to_dict(hed), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_hed(path) -> HierarchicalED:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return hed_from_dict(doc)
