"""Predict hierarchical EDs from text, sequentially or in parallel.

The text encoder is a learned phoneme-embedding table with mean pooling;
it stays frozen while the prediction heads train, so the comparison under
test (multi-step cross-level conditioning vs single-step independence)
is isolated from encoder quality.

multi_step: utterance ED first, then word EDs conditioned on it, then
phoneme EDs conditioned on both. single_step: each level predicted from
its pooled embedding alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, EmptyDataset, FormatError, InvalidInput
from .hed import HierarchicalED, mean_abs_diff
from .neural import MlpModel, TrainConfig, fit, forward, forward_batch, init_mlp
from .neural import model_from_dict as net_from_dict
from .neural import model_to_dict as net_to_dict
from .ranker import EmotionSet

K_DEFAULT = 16
UNK_SYMBOL = "<unk>"

MULTI_STEP = "multi_step"
SINGLE_STEP = "single_step"

BUNDLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EmbeddingTable:
    """Phoneme-symbol lookup; row 0 is the reserved unknown-symbol row."""

    symbols: tuple
    matrix: np.ndarray

    def __post_init__(self):
        symbols = tuple(self.symbols)
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if symbols[0] != UNK_SYMBOL:
            raise InvalidInput(f"symbol 0 must be {UNK_SYMBOL!r}")
        if len(set(symbols)) != len(symbols):
            raise InvalidInput("duplicate symbols in embedding table")
        if matrix.shape[0] != len(symbols):
            raise InvalidInput(
                f"{len(symbols)} symbols but {matrix.shape[0]} embedding rows")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(
            self, "_index", {s: i for i, s in enumerate(symbols)})

    @property
    def k(self) -> int:
        return self.matrix.shape[1]

    def index(self, symbol: str) -> int:
        return self._index.get(symbol, 0)


def build_embedding_table(vocab, k: int = K_DEFAULT,
                          seed: int = 0) -> EmbeddingTable:
    """Seeded uniform init with per-dimension variance 1/k."""
    symbols = (UNK_SYMBOL,) + tuple(sorted(set(vocab) - {UNK_SYMBOL}))
    rng = np.random.default_rng(seed)
    a = np.sqrt(3.0 / k)
    return EmbeddingTable(symbols=symbols,
                          matrix=rng.uniform(-a, a, size=(len(symbols), k)))


@dataclass(frozen=True)
class TextEncoding:
    """Per-phone embeddings plus exact mean poolings at word/utterance level."""

    phone_embeddings: np.ndarray  # (P, K)
    word_pooled: np.ndarray  # (W, K)
    utt_pooled: np.ndarray  # (K,)
    word_phone_ranges: tuple  # (lo, hi) per word
    phone_indices: tuple  # embedding-table row per phone

    @property
    def n_words(self) -> int:
        return self.word_pooled.shape[0]

    @property
    def n_phones(self) -> int:
        return self.phone_embeddings.shape[0]

    def word_of_phone(self, p: int) -> int:
        for w, (lo, hi) in enumerate(self.word_phone_ranges):
            if lo <= p < hi:
                return w
        raise IndexError(f"phone {p} not covered by any word")


def encode(table: EmbeddingTable, words) -> TextEncoding:
    """words: sequence of words, each a sequence of phone symbols."""
    if not words or any(len(w) == 0 for w in words):
        raise InvalidInput("need at least one word, each with at least one phone")
    indices = []
    ranges = []
    for word in words:
        lo = len(indices)
        indices.extend(table.index(s) for s in word)
        ranges.append((lo, len(indices)))
    emb = table.matrix[np.array(indices)]
    word_pooled = np.vstack([emb[lo:hi].mean(axis=0) for lo, hi in ranges])
    return TextEncoding(phone_embeddings=emb, word_pooled=word_pooled,
                        utt_pooled=emb.mean(axis=0),
                        word_phone_ranges=tuple(ranges),
                        phone_indices=tuple(indices))


@dataclass
class EdPredictor:
    mode: str
    table: EmbeddingTable
    utt_net: MlpModel
    word_net: MlpModel
    phone_net: MlpModel
    emotions: EmotionSet = EmotionSet()

    def __post_init__(self):
        if self.mode not in (MULTI_STEP, SINGLE_STEP):
            raise ConfigError(f"unknown predictor mode '{self.mode}'")
        k = self.table.k
        e = self.emotions.size
        expect_word = k + e if self.mode == MULTI_STEP else k
        expect_phone = k + 2 * e if self.mode == MULTI_STEP else k
        checks = [
            ("utt_net", self.utt_net, k, e),
            ("word_net", self.word_net, expect_word, e),
            ("phone_net", self.phone_net, expect_phone, e),
        ]
        for name, net, want_in, want_out in checks:
            if net.input_dim != want_in or net.output_dim != want_out:
                raise ConfigError(
                    f"{name} must map {want_in}->{want_out} in {self.mode} "
                    f"mode, got {net.input_dim}->{net.output_dim}")
            if net.layers[-1].activation != "sigmoid":
                raise ConfigError(f"{name} must end in a sigmoid layer")


def new_predictor(vocab, mode: str = MULTI_STEP,
                  emotions: EmotionSet = EmotionSet(), k: int = K_DEFAULT,
                  hidden: int = 24, seed: int = 0) -> EdPredictor:
    e = emotions.size
    table = build_embedding_table(vocab, k=k, seed=seed)
    if mode == MULTI_STEP:
        word_in, phone_in = k + e, k + 2 * e
    else:
        word_in, phone_in = k, k
    return EdPredictor(
        mode=mode, table=table, emotions=emotions,
        utt_net=init_mlp([k, hidden, e], ["tanh", "sigmoid"], seed=seed + 1),
        word_net=init_mlp([word_in, hidden, e], ["tanh", "sigmoid"], seed=seed + 2),
        phone_net=init_mlp([phone_in, hidden, e], ["tanh", "sigmoid"],
                           seed=seed + 3))


def predict_utterance(pred: EdPredictor, enc: TextEncoding) -> np.ndarray:
    return forward(pred.utt_net, enc.utt_pooled)


def predict_words(pred: EdPredictor, enc: TextEncoding,
                  utt_ed: np.ndarray) -> np.ndarray:
    """Word-level EDs; utt_ed is consumed only in multi_step mode."""
    if pred.mode == MULTI_STEP:
        inputs = np.hstack([enc.word_pooled,
                            np.tile(utt_ed, (enc.n_words, 1))])
    else:
        inputs = enc.word_pooled
    return forward_batch(pred.word_net, inputs)


def predict_phones(pred: EdPredictor, enc: TextEncoding,
                   word_eds: np.ndarray, utt_ed: np.ndarray) -> np.ndarray:
    """Phoneme-level EDs; upstream EDs consumed only in multi_step mode."""
    if pred.mode == MULTI_STEP:
        owner = np.empty((enc.n_phones, word_eds.shape[1]))
        for w, (lo, hi) in enumerate(enc.word_phone_ranges):
            owner[lo:hi] = word_eds[w]
        inputs = np.hstack([enc.phone_embeddings, owner,
                            np.tile(utt_ed, (enc.n_phones, 1))])
    else:
        inputs = enc.phone_embeddings
    return forward_batch(pred.phone_net, inputs)


def predict(pred: EdPredictor, enc: TextEncoding) -> HierarchicalED:
    """Full three-level prediction, each level feeding the next in multi_step."""
    utt = predict_utterance(pred, enc)
    words = predict_words(pred, enc, utt)
    phones = predict_phones(pred, enc, words, utt)
    return HierarchicalED(utterance=utt, words=words, phones=phones,
                          emotions=pred.emotions)


def _level_datasets(pred: EdPredictor, corpus):
    """Stack per-level (input, target) training matrices over the corpus.

    Word and phoneme inputs carry teacher-forced ground-truth upstream EDs
    in multi_step mode.
    """
    utt_x, utt_t = [], []
    word_x, word_t = [], []
    phone_x, phone_t = [], []
    for words, gt in corpus:
        enc = encode(pred.table, words)
        if enc.n_words != gt.n_words or enc.n_phones != gt.n_phones:
            raise InvalidInput(
                f"text has {enc.n_words} words/{enc.n_phones} phones but ED has "
                f"{gt.n_words}/{gt.n_phones}")
        utt_x.append(enc.utt_pooled)
        utt_t.append(gt.utterance)
        if pred.mode == MULTI_STEP:
            word_in = np.hstack([enc.word_pooled,
                                 np.tile(gt.utterance, (enc.n_words, 1))])
            owner = np.vstack([gt.words[enc.word_of_phone(p)]
                               for p in range(enc.n_phones)])
            phone_in = np.hstack([enc.phone_embeddings, owner,
                                  np.tile(gt.utterance, (enc.n_phones, 1))])
        else:
            word_in = enc.word_pooled
            phone_in = enc.phone_embeddings
        word_x.append(word_in)
        word_t.append(gt.words)
        phone_x.append(phone_in)
        phone_t.append(gt.phones)
    return ((np.vstack(utt_x), np.vstack(utt_t)),
            (np.vstack(word_x), np.vstack(word_t)),
            (np.vstack(phone_x), np.vstack(phone_t)))


def train_predictor(pred: EdPredictor, corpus,
                    cfg: TrainConfig = TrainConfig()):
    """Train the three heads on (words, ground-truth ED) pairs.

    multi_step trains in sequence (utterance, then word on ground-truth
    utterance EDs, then phoneme on ground-truth word+utterance EDs);
    single_step has no cross-level inputs so the stages are independent.
    The embedding table is never updated here. Returns per-level history.
    """
    corpus = list(corpus)
    if not corpus:
        raise EmptyDataset("predictor training needs at least one item")
    (utt_xy, word_xy, phone_xy) = _level_datasets(pred, corpus)
    history = {}
    for i, (name, net, (x, t)) in enumerate([
            ("utterance", pred.utt_net, utt_xy),
            ("words", pred.word_net, word_xy),
            ("phones", pred.phone_net, phone_xy)]):
        _, losses = fit(net, x, t, replace(cfg, seed=cfg.seed + i))
        history[name] = losses
    return pred, history


def eval_predictor(pred: EdPredictor, corpus,
                   teacher_forcing: str = "predicted") -> dict:
    """Mean absolute ED difference per level, averaged over the corpus.

    teacher_forcing="ground_truth" feeds ground-truth upstream EDs to the
    downstream heads (multi_step only); "predicted" feeds the model's own
    outputs, exposing error accumulation across stages.
    """
    if teacher_forcing not in ("predicted", "ground_truth"):
        raise ConfigError(f"unknown teacher_forcing '{teacher_forcing}'")
    if teacher_forcing == "ground_truth" and pred.mode != MULTI_STEP:
        raise ConfigError("ground_truth teacher forcing needs a multi_step "
                          "predictor; single_step has no upstream inputs")
    corpus = list(corpus)
    if not corpus:
        raise EmptyDataset("evaluation needs at least one item")
    sums = {"phones": 0.0, "words": 0.0, "utterance": 0.0}
    for words, gt in corpus:
        enc = encode(pred.table, words)
        utt = predict_utterance(pred, enc)
        if teacher_forcing == "ground_truth":
            word_eds = predict_words(pred, enc, gt.utterance)
            phone_eds = predict_phones(pred, enc, gt.words, gt.utterance)
        else:
            word_eds = predict_words(pred, enc, utt)
            phone_eds = predict_phones(pred, enc, word_eds, utt)
        got = HierarchicalED(utterance=utt, words=word_eds, phones=phone_eds,
                             emotions=pred.emotions)
        d = mean_abs_diff(got, gt)
        for key in sums:
            sums[key] += d[key]
    n = len(corpus)
    report = {key: val / n for key, val in sums.items()}
    report["average"] = (report["phones"] + report["words"]
                         + report["utterance"]) / 3.0
    report["teacher_forcing"] = teacher_forcing
    report["n_items"] = n
    return report


def predictor_to_dict(pred: EdPredictor) -> dict:
    return {
        "version": BUNDLE_FORMAT_VERSION,
        "mode": pred.mode,
        "emotions": list(pred.emotions.labels),
        "embedding": {
            "symbols": list(pred.table.symbols),
            "k": pred.table.k,
            "matrix": [float(v) for v in pred.table.matrix.ravel()],
        },
        "utt_net": net_to_dict(pred.utt_net),
        "word_net": net_to_dict(pred.word_net),
        "phone_net": net_to_dict(pred.phone_net),
    }


def predictor_from_dict(doc: dict) -> EdPredictor:
    try:
        emb = doc["embedding"]
        symbols = tuple(emb["symbols"])
        k = int(emb["k"])
        matrix = np.array(emb["matrix"], dtype=np.float64).reshape(len(symbols), k)
        return EdPredictor(
            mode=str(doc["mode"]),
            table=EmbeddingTable(symbols=symbols, matrix=matrix),
            utt_net=net_from_dict(doc["utt_net"]),
            word_net=net_from_dict(doc["word_net"]),
            phone_net=net_from_dict(doc["phone_net"]),
            emotions=EmotionSet(labels=tuple(doc["emotions"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed predictor bundle: {exc}") from None


def save_predictor(pred: EdPredictor, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(predictor_to_dict(pred), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_predictor(path) -> EdPredictor:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return predictor_from_dict(doc)
