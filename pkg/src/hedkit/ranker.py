"""Per-emotion linear ranking functions mapping features to intensity.

Each emotion gets an independent max-margin scorer f(x) = w^T x + b trained
one-vs-rest (Neutral and the other emotions as negatives). Raw scores are
normalized to [0,1] against the training-set score range, so larger values
mean stronger emotion intensity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimError, FormatError, InvalidInput, InvalidTrainingSet
from .signal import SegmentFeatures

DEFAULT_EMOTIONS = ("Angry", "Happy", "Sad", "Surprise")


@dataclass(frozen=True)
class EmotionSet:
    labels: tuple = DEFAULT_EMOTIONS

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise InvalidInput("emotion set must be non-empty")
        if len(set(labels)) != len(labels):
            raise InvalidInput(f"duplicate emotion labels: {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidInput(f"unknown emotion '{label}'") from None


@dataclass(frozen=True)
class RankingModel:
    """Linear scorer for one emotion with its normalization range."""

    emotion: str
    w: np.ndarray
    b: float
    norm_lo: float
    norm_hi: float
    dim_labels: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if not np.all(np.isfinite(w)):
            raise InvalidInput("weights must be finite")
        if not self.norm_lo < self.norm_hi:
            raise InvalidInput(
                f"norm_lo must be < norm_hi, got [{self.norm_lo}, {self.norm_hi}]")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "dim_labels", tuple(self.dim_labels))

    def __eq__(self, other):
        return (isinstance(other, RankingModel)
                and self.emotion == other.emotion
                and np.array_equal(self.w, other.w)
                and self.b == other.b
                and self.norm_lo == other.norm_lo
                and self.norm_hi == other.norm_hi
                and self.dim_labels == other.dim_labels)


@dataclass(frozen=True)
class RankTrainConfig:
    reg_lambda: float = 1e-3
    epochs: int = 60
    learning_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.reg_lambda <= 0:
            raise InvalidInput("reg_lambda must be positive")
        if self.epochs < 1:
            raise InvalidInput("epochs must be at least 1")


def _vec(x) -> np.ndarray:
    if isinstance(x, SegmentFeatures):
        return x.values
    return np.asarray(x, dtype=np.float64)


def raw_score(model: RankingModel, x) -> float:
    """w^T x + b, the unnormalized ranking score."""
    v = _vec(x)
    if v.shape != model.w.shape:
        raise DimError(f"feature dim {v.shape} does not match model {model.w.shape}")
    return float(model.w @ v + model.b)


def intensity(model: RankingModel, x) -> float:
    """Normalized score in [0,1]; clamps raw scores outside the train range."""
    raw = raw_score(model, x)
    val = (raw - model.norm_lo) / (model.norm_hi - model.norm_lo)
    return float(min(1.0, max(0.0, val)))


def train(positives, negatives, cfg: RankTrainConfig = RankTrainConfig(),
          emotion: str = "", dim_labels=()) -> RankingModel:
    """Fit the hinge-loss objective by subgradient descent.

    Minimizes mean hinge + reg_lambda*||w||^2 with per-sample updates on a
    decaying step. Samples are put into a canonical (sorted) order before
    each seeded shuffle, so the same multiset of vectors always trains the
    same model regardless of input ordering. norm_lo/norm_hi record the raw
    score range over all training features.
    """
    pos = [_vec(x) for x in positives]
    neg = [_vec(x) for x in negatives]
    if not pos or not neg:
        raise InvalidTrainingSet(
            f"{emotion or 'ranker'}: both classes need at least one sample")
    dim = len(pos[0])
    for v in pos + neg:
        if len(v) != dim:
            raise DimError("inconsistent feature dimensions in training set")

    data = np.vstack(pos + neg)
    labels = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    # canonical order: lexicographic by (label, feature values)
    order = np.lexsort(np.vstack([data.T[::-1], labels]))
    data = data[order]
    labels = labels[order]

    # standardize features for conditioning; fold back into w/b afterwards
    mu = data.mean(axis=0)
    sigma = data.std(axis=0)
    sigma[sigma == 0] = 1.0
    z = (data - mu) / sigma

    rng = np.random.default_rng(cfg.seed)
    w = np.zeros(dim)
    b = 0.0
    t = 0
    for _ in range(cfg.epochs):
        for i in rng.permutation(len(z)):
            t += 1
            eta = cfg.learning_rate / (1.0 + cfg.learning_rate * cfg.reg_lambda * t)
            margin = labels[i] * (w @ z[i] + b)
            w *= 1.0 - 2.0 * eta * cfg.reg_lambda
            if margin < 1.0:
                w += eta * labels[i] * z[i]
                b += eta * labels[i]

    w_raw = w / sigma
    b_raw = b - float(w_raw @ mu)
    scores = data @ w_raw + b_raw
    lo = float(scores.min())
    hi = float(scores.max())
    if not lo < hi:
        # all scores identical (e.g. w ~ 0 on degenerate data): pad the range
        lo -= 0.5
        hi += 0.5
    return RankingModel(emotion=emotion, w=w_raw, b=b_raw, norm_lo=lo,
                        norm_hi=hi, dim_labels=tuple(dim_labels))


def train_all(dataset: dict, emotions: EmotionSet = EmotionSet(),
              cfg: RankTrainConfig = RankTrainConfig()) -> dict:
    """One model per emotion; everything else (incl. Neutral) is negative."""
    models = {}
    for label in emotions.labels:
        pos = list(dataset.get(label, ()))
        neg = [x for other, xs in sorted(dataset.items()) if other != label
               for x in xs]
        if not pos:
            raise InvalidTrainingSet(label)
        first = dataset[label][0]
        dim_labels = first.dim_labels if isinstance(first, SegmentFeatures) else ()
        models[label] = train(pos, neg, cfg, emotion=label, dim_labels=dim_labels)
    return models


def model_to_dict(model: RankingModel) -> dict:
    return {
        "emotion": model.emotion,
        "w": [float(v) for v in model.w],
        "b": float(model.b),
        "norm_lo": model.norm_lo,
        "norm_hi": model.norm_hi,
        "dim_labels": list(model.dim_labels),
    }


def model_from_dict(doc: dict) -> RankingModel:
    try:
        return RankingModel(
            emotion=str(doc["emotion"]), w=np.array(doc["w"], dtype=np.float64),
            b=float(doc["b"]), norm_lo=float(doc["norm_lo"]),
            norm_hi=float(doc["norm_hi"]),
            dim_labels=tuple(doc.get("dim_labels", ())))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed ranking model: {exc}") from None


def save_bundle(models: dict, path) -> None:
    """Write the per-emotion models as a JSON array, emotion-sorted."""
    docs = [model_to_dict(models[k]) for k in sorted(models)]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(docs, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bundle(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            docs = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    if not isinstance(docs, list):
        raise FormatError(f"{path}: bundle must be a JSON array")
    models = {}
    for doc in docs:
        model = model_from_dict(doc)
        models[model.emotion] = model
    return models
