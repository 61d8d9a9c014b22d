"""Desk-scale variance adaptor: phoneme-aligned EDs to prosody.

Predicts per-phoneme pitch (log-Hz), energy (log) and duration (log domain,
exponentiated on output). Two compositions:

external -- the ED columns pass through a tanh embedding net before the
prosody head; the linguistic embedding table is frozen (the predictor was
trained outside, against a frozen encoder).

va -- the prosody head consumes raw ED columns, an EdPredictor lives inside
the model, and training couples them: prosody MSE plus va_loss_weight times
the predictor's ED MSE, with both losses sending gradients into the shared
embedding table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    EmptyDataset,
    FormatError,
    InvalidInput,
    ShapeError,
    UnknownSpeaker,
)
from .hed import HierarchicalED, PhonemeAlignedED
from .neural import (
    MlpModel,
    Momentum,
    TrainConfig,
    backward_batch,
    forward_batch,
    init_mlp,
)
from .neural import model_from_dict as net_from_dict
from .neural import model_to_dict as net_to_dict
from .predictor import (
    MULTI_STEP,
    EdPredictor,
    EmbeddingTable,
    TextEncoding,
    build_embedding_table,
    encode,
    new_predictor,
    predictor_from_dict,
    predictor_to_dict,
)
from .ranker import EmotionSet

EXTERNAL = "external"
VA = "va"

J_DEFAULT = 8  # ED embedding width (external mode)
S_DEFAULT = 4  # speaker embedding width

RENDERER_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ProsodyContour:
    """Per-phoneme prosody triple; durations strictly positive."""

    phones: tuple
    pitch_log_hz: np.ndarray
    energy_log: np.ndarray
    duration_s: np.ndarray
    hop_s: float = 0.010

    def __post_init__(self):
        pitch = np.asarray(self.pitch_log_hz, dtype=np.float64)
        energy = np.asarray(self.energy_log, dtype=np.float64)
        dur = np.asarray(self.duration_s, dtype=np.float64)
        n = len(self.phones)
        if not (pitch.shape == energy.shape == dur.shape == (n,)):
            raise ShapeError("contour arrays must all match the phone count")
        if np.any(dur <= 0):
            raise InvalidInput("durations must be positive")
        if not all(np.all(np.isfinite(a)) for a in (pitch, energy, dur)):
            raise InvalidInput("contour values must be finite")
        object.__setattr__(self, "phones", tuple(self.phones))
        object.__setattr__(self, "pitch_log_hz", pitch)
        object.__setattr__(self, "energy_log", energy)
        object.__setattr__(self, "duration_s", dur)

    def __eq__(self, other):
        return (isinstance(other, ProsodyContour)
                and self.phones == other.phones
                and self.hop_s == other.hop_s
                and np.array_equal(self.pitch_log_hz, other.pitch_log_hz)
                and np.array_equal(self.energy_log, other.energy_log)
                and np.array_equal(self.duration_s, other.duration_s))

    def __len__(self) -> int:
        return len(self.phones)


def expand_contour(c: ProsodyContour) -> tuple:
    """Piecewise-constant frame tracks at hop_s: (pitch_log_hz, energy_log).

    Each phoneme contributes round(duration/hop) frames (at least one), so
    durations that are hop multiples expand exactly proportionally.
    """
    counts = np.maximum(1, np.round(c.duration_s / c.hop_s).astype(int))
    pitch = np.repeat(c.pitch_log_hz, counts)
    energy = np.repeat(c.energy_log, counts)
    return pitch, energy


@dataclass(frozen=True)
class SpeakerTable:
    ids: tuple
    matrix: np.ndarray

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if len(set(ids)) != len(ids):
            raise InvalidInput("duplicate speaker ids")
        if matrix.shape[0] != len(ids):
            raise InvalidInput(f"{len(ids)} ids but {matrix.shape[0]} rows")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(ids)})

    @property
    def s(self) -> int:
        return self.matrix.shape[1]

    def index(self, speaker_id: str) -> int:
        try:
            return self._index[str(speaker_id)]
        except KeyError:
            raise UnknownSpeaker(f"unknown speaker '{speaker_id}'") from None

    def row(self, speaker_id: str) -> np.ndarray:
        return self.matrix[self.index(speaker_id)]


def build_speaker_table(ids, s: int = S_DEFAULT, seed: int = 0) -> SpeakerTable:
    rng = np.random.default_rng(seed)
    ids = tuple(str(i) for i in ids)
    a = np.sqrt(3.0 / s)
    return SpeakerTable(ids=ids, matrix=rng.uniform(-a, a, size=(len(ids), s)))


@dataclass
class RendererModel:
    mode: str
    prosody_net: MlpModel
    speakers: SpeakerTable
    emotions: EmotionSet = EmotionSet()
    table: EmbeddingTable = None  # external mode; va uses predictor.table
    ed_embedding: MlpModel = None  # external mode only
    predictor: EdPredictor = None  # va mode only

    def __post_init__(self):
        e3 = 3 * self.emotions.size
        if self.mode == EXTERNAL:
            if self.ed_embedding is None or self.table is None:
                raise ConfigError("external mode needs ed_embedding and table")
            if self.predictor is not None:
                raise ConfigError("external mode does not embed a predictor")
            if any(l.activation != "tanh" for l in self.ed_embedding.layers):
                raise ConfigError("ed_embedding must be all-tanh")
            if self.ed_embedding.input_dim != e3:
                raise ConfigError(
                    f"ed_embedding input must be {e3}, got "
                    f"{self.ed_embedding.input_dim}")
            expect = self.table.k + self.ed_embedding.output_dim + self.speakers.s
        elif self.mode == VA:
            if self.predictor is None:
                raise ConfigError("va mode needs an embedded predictor")
            if self.ed_embedding is not None:
                raise ConfigError("va mode does not use an ed_embedding net")
            if self.table is None:
                self.table = self.predictor.table
            if self.table is not self.predictor.table:
                raise ConfigError("va mode must share the predictor's table")
            expect = self.table.k + e3 + self.speakers.s
        else:
            raise ConfigError(f"unknown renderer mode '{self.mode}'")
        if self.prosody_net.input_dim != expect:
            raise ConfigError(
                f"prosody_net input must be {expect} in {self.mode} mode, "
                f"got {self.prosody_net.input_dim}")
        if self.prosody_net.output_dim != 3:
            raise ConfigError("prosody_net must output (pitch, energy, duration)")

    @property
    def k(self) -> int:
        return self.table.k


def new_renderer(vocab, speaker_ids, mode: str = VA,
                 emotions: EmotionSet = EmotionSet(), k: int = 16,
                 j: int = J_DEFAULT, s: int = S_DEFAULT, hidden: int = 24,
                 predictor_mode: str = MULTI_STEP, seed: int = 0) -> RendererModel:
    e3 = 3 * emotions.size
    speakers = build_speaker_table(speaker_ids, s=s, seed=seed + 10)
    if mode == EXTERNAL:
        table = build_embedding_table(vocab, k=k, seed=seed)
        return RendererModel(
            mode=mode, emotions=emotions, speakers=speakers, table=table,
            ed_embedding=init_mlp([e3, j], ["tanh"], seed=seed + 11),
            prosody_net=init_mlp([k + j + s, hidden, 3], ["tanh", "identity"],
                                 seed=seed + 12))
    if mode == VA:
        pred = new_predictor(vocab, mode=predictor_mode, emotions=emotions,
                             k=k, seed=seed)
        return RendererModel(
            mode=mode, emotions=emotions, speakers=speakers, predictor=pred,
            prosody_net=init_mlp([k + e3 + s, hidden, 3], ["tanh", "identity"],
                                 seed=seed + 12))
    raise ConfigError(f"unknown renderer mode '{mode}'")


def _prosody_inputs(model: RendererModel, enc: TextEncoding,
                    aligned: PhonemeAlignedED, speaker_id: str) -> np.ndarray:
    if aligned.matrix.shape[0] != enc.n_phones:
        raise ShapeError(
            f"aligned ED has {aligned.matrix.shape[0]} rows for "
            f"{enc.n_phones} phones")
    spk = np.tile(model.speakers.row(speaker_id), (enc.n_phones, 1))
    if model.mode == EXTERNAL:
        ed_cols = forward_batch(model.ed_embedding, aligned.matrix)
    else:
        ed_cols = aligned.matrix
    return np.hstack([enc.phone_embeddings, ed_cols, spk])


def render(model: RendererModel, enc: TextEncoding, aligned: PhonemeAlignedED,
           speaker_id: str) -> ProsodyContour:
    """Per-phoneme prosody; deterministic, local to each input row."""
    x = _prosody_inputs(model, enc, aligned, speaker_id)
    out = forward_batch(model.prosody_net, x)
    symbols = tuple(model.table.symbols[i] for i in enc.phone_indices)
    return ProsodyContour(phones=symbols, pitch_log_hz=out[:, 0],
                          energy_log=out[:, 1], duration_s=np.exp(out[:, 2]))


def aligned_from_ranges(hed: HierarchicalED, word_ranges) -> PhonemeAlignedED:
    """Build the P x 3E layout from word->phone index ranges (no timing)."""
    e = hed.emotions.size
    n_phones = hed.n_phones
    matrix = np.empty((n_phones, 3 * e))
    matrix[:, :e] = hed.utterance
    covered = 0
    for w, (lo, hi) in enumerate(word_ranges):
        matrix[lo:hi, e:2 * e] = hed.words[w]
        covered += hi - lo
    if covered != n_phones or len(word_ranges) != hed.n_words:
        raise ShapeError("word ranges do not cover the ED phone rows")
    matrix[:, 2 * e:] = hed.phones
    return PhonemeAlignedED(matrix=matrix, emotions=hed.emotions)


def _word_ranges_of(scope_source) -> tuple:
    """Word index ranges from a Segmentation or a TextEncoding."""
    if hasattr(scope_source, "words"):
        return tuple(w.phone_range for w in scope_source.words)
    if hasattr(scope_source, "word_phone_ranges"):
        return scope_source.word_phone_ranges
    return tuple(scope_source)


def contour_stats(c: ProsodyContour, seg_or_enc, scope) -> dict:
    """Duration-weighted prosody statistics over a scope.

    scope is "utterance" or a word index; word extents come from a
    Segmentation, a TextEncoding, or an explicit (lo, hi) list.
    """
    ranges = _word_ranges_of(seg_or_enc)
    total_phones = max(hi for _, hi in ranges)
    if total_phones != len(c):
        raise ShapeError(
            f"contour has {len(c)} phones but scope source has {total_phones}")
    if scope == "utterance":
        lo, hi = 0, len(c)
    else:
        idx = int(scope)
        if not 0 <= idx < len(ranges):
            raise IndexError(f"word index {idx} out of range")
        lo, hi = ranges[idx]
    dur = c.duration_s[lo:hi]
    weight = dur / dur.sum()

    def wstats(values):
        mean = float(np.dot(weight, values))
        var = float(np.dot(weight, (values - mean) ** 2))
        return mean, float(np.sqrt(max(var, 0.0)))

    pitch_mean, pitch_std = wstats(c.pitch_log_hz[lo:hi])
    energy_mean, energy_std = wstats(c.energy_log[lo:hi])
    return {
        "pitch_mean": pitch_mean,
        "pitch_std": pitch_std,
        "energy_mean": energy_mean,
        "energy_std": energy_std,
        "duration_total": float(dur.sum()),
    }


def _contour_targets(contour: ProsodyContour) -> np.ndarray:
    return np.column_stack([contour.pitch_log_hz, contour.energy_log,
                            np.log(contour.duration_s)])


class _TableGrad:
    """Accumulates gradients into embedding-table rows with momentum."""

    def __init__(self, matrix: np.ndarray, beta: float):
        self.vel = np.zeros_like(matrix)
        self.beta = beta
        self.grad = np.zeros_like(matrix)

    def add_rows(self, indices, rows) -> None:
        np.add.at(self.grad, np.asarray(indices), rows)

    def step(self, matrix: np.ndarray, lr: float) -> None:
        self.vel *= self.beta
        self.vel -= lr * self.grad
        matrix += self.vel
        self.grad[:] = 0.0


def train_renderer(model: RendererModel, corpus,
                   cfg: TrainConfig = TrainConfig(),
                   va_loss_weight: float = 1.0):
    """Train on (words, HierarchicalED, target ProsodyContour, speaker) items.

    Prosody inputs take the ground-truth aligned EDs (teacher forcing), so
    the prosody loss is well-defined in both modes. In va mode the embedded
    predictor trains against its ED targets inside the same loop, and the
    shared embedding table accumulates gradients from both losses; with
    va_loss_weight=0 the ED term is skipped entirely. Returns per-epoch
    history {"prosody": [...], "ed": [...]}.
    """
    items = list(corpus)
    if not items:
        raise EmptyDataset("renderer training needs at least one item")
    if va_loss_weight < 0:
        raise InvalidInput("va_loss_weight must be non-negative")
    train_ed = model.mode == VA and va_loss_weight > 0

    rng = np.random.default_rng(cfg.seed)
    opt_pros = Momentum(model.prosody_net, cfg.momentum)
    spk_grad = _TableGrad(model.speakers.matrix, cfg.momentum)
    if model.mode == EXTERNAL:
        opt_ed_emb = Momentum(model.ed_embedding, cfg.momentum)
    if train_ed:
        pred = model.predictor
        opt_utt = Momentum(pred.utt_net, cfg.momentum)
        opt_word = Momentum(pred.word_net, cfg.momentum)
        opt_phone = Momentum(pred.phone_net, cfg.momentum)
    if model.mode == VA:
        tab_grad = _TableGrad(model.table.matrix, cfg.momentum)

    prepared = []
    for words, gt_hed, contour, speaker_id in items:
        if gt_hed.emotions != model.emotions:
            raise ConfigError("corpus emotion set differs from the model's")
        prepared.append((tuple(tuple(w) for w in words), gt_hed,
                         _contour_targets(contour),
                         model.speakers.index(speaker_id)))

    e = model.emotions.size
    k = model.table.k
    history = {"prosody": [], "ed": []}
    for _ in range(cfg.epochs):
        order = rng.permutation(len(prepared))
        pros_sum = 0.0
        ed_sum = 0.0
        for item_i in order:
            words, gt_hed, targets, spk_idx = prepared[item_i]
            enc = encode(model.table, words)
            n_phones = enc.n_phones
            aligned = aligned_from_ranges(gt_hed, enc.word_phone_ranges)
            spk = np.tile(model.speakers.matrix[spk_idx], (n_phones, 1))

            if model.mode == EXTERNAL:
                ed_cols = forward_batch(model.ed_embedding, aligned.matrix)
            else:
                ed_cols = aligned.matrix
            x = np.hstack([enc.phone_embeddings, ed_cols, spk])
            pred_out = forward_batch(model.prosody_net, x)
            pros_sum += float(np.mean((pred_out - targets) ** 2))
            d_out = 2.0 * (pred_out - targets) / targets.size
            grads, d_x = backward_batch(model.prosody_net, x, d_out)
            opt_pros.step(model.prosody_net, grads, cfg.learning_rate)
            spk_grad.add_rows([spk_idx], d_x[:, -model.speakers.s:].sum(
                axis=0, keepdims=True))
            if model.mode == EXTERNAL:
                d_ed_cols = d_x[:, k:k + model.ed_embedding.output_dim]
                g_emb, _ = backward_batch(model.ed_embedding, aligned.matrix,
                                          d_ed_cols)
                opt_ed_emb.step(model.ed_embedding, g_emb, cfg.learning_rate)
            else:
                tab_grad.add_rows(enc.phone_indices, d_x[:, :k])

            if train_ed:
                ed_sum += _ed_step(model, enc, gt_hed, va_loss_weight, cfg,
                                   opt_utt, opt_word, opt_phone, tab_grad, e, k)
            if model.mode == VA:
                tab_grad.step(model.table.matrix, cfg.learning_rate)
            spk_grad.step(model.speakers.matrix, cfg.learning_rate)
        history["prosody"].append(pros_sum / len(prepared))
        history["ed"].append(ed_sum / len(prepared) if train_ed else 0.0)
    return model, history


def _ed_step(model, enc, gt_hed, weight, cfg, opt_utt, opt_word, opt_phone,
             tab_grad, e, k):
    """One joint-loss ED update; returns the (unweighted) ED loss."""
    pred = model.predictor
    n_words, n_phones = enc.n_words, enc.n_phones
    scale = weight / 3.0

    x_u = enc.utt_pooled[None, :]
    out_u = forward_batch(pred.utt_net, x_u)
    loss_u = float(np.mean((out_u[0] - gt_hed.utterance) ** 2))
    d_u = scale * 2.0 * (out_u - gt_hed.utterance[None, :]) / e
    g_u, dx_u = backward_batch(pred.utt_net, x_u, d_u)
    opt_utt.step(pred.utt_net, g_u, cfg.learning_rate)
    # utt pooling is a mean over all phones
    tab_grad.add_rows(enc.phone_indices,
                      np.tile(dx_u[0] / n_phones, (n_phones, 1)))

    if pred.mode == MULTI_STEP:
        x_w = np.hstack([enc.word_pooled,
                         np.tile(gt_hed.utterance, (n_words, 1))])
    else:
        x_w = enc.word_pooled
    out_w = forward_batch(pred.word_net, x_w)
    loss_w = float(np.mean((out_w - gt_hed.words) ** 2))
    d_w = scale * 2.0 * (out_w - gt_hed.words) / gt_hed.words.size
    g_w, dx_w = backward_batch(pred.word_net, x_w, d_w)
    opt_word.step(pred.word_net, g_w, cfg.learning_rate)
    for w, (lo, hi) in enumerate(enc.word_phone_ranges):
        span = hi - lo
        tab_grad.add_rows(enc.phone_indices[lo:hi],
                          np.tile(dx_w[w, :k] / span, (span, 1)))

    if pred.mode == MULTI_STEP:
        owner = np.vstack([gt_hed.words[enc.word_of_phone(p)]
                           for p in range(n_phones)])
        x_p = np.hstack([enc.phone_embeddings, owner,
                         np.tile(gt_hed.utterance, (n_phones, 1))])
    else:
        x_p = enc.phone_embeddings
    out_p = forward_batch(pred.phone_net, x_p)
    loss_p = float(np.mean((out_p - gt_hed.phones) ** 2))
    d_p = scale * 2.0 * (out_p - gt_hed.phones) / gt_hed.phones.size
    g_p, dx_p = backward_batch(pred.phone_net, x_p, d_p)
    opt_phone.step(pred.phone_net, g_p, cfg.learning_rate)
    tab_grad.add_rows(enc.phone_indices, dx_p[:, :k])

    return (loss_u + loss_w + loss_p) / 3.0


def contour_to_dict(c: ProsodyContour) -> dict:
    pitch_track, energy_track = expand_contour(c)
    return {
        "hop_s": c.hop_s,
        "phones": [
            {
                "phone": c.phones[i],
                "pitch_log_hz": float(c.pitch_log_hz[i]),
                "energy_log": float(c.energy_log[i]),
                "duration_s": float(c.duration_s[i]),
            }
            for i in range(len(c))
        ],
        "tracks": {
            "pitch_log_hz": [float(v) for v in pitch_track],
            "energy_log": [float(v) for v in energy_track],
        },
    }


def contour_from_dict(doc: dict) -> ProsodyContour:
    try:
        recs = doc["phones"]
        return ProsodyContour(
            phones=tuple(str(r["phone"]) for r in recs),
            pitch_log_hz=np.array([r["pitch_log_hz"] for r in recs], float),
            energy_log=np.array([r["energy_log"] for r in recs], float),
            duration_s=np.array([r["duration_s"] for r in recs], float),
            hop_s=float(doc.get("hop_s", 0.010)))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed contour: {exc}") from None


def save_contour(c: ProsodyContour, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(contour_to_dict(c), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_contour(path) -> ProsodyContour:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return contour_from_dict(doc)


def renderer_to_dict(model: RendererModel) -> dict:
    doc = {
        "version": RENDERER_FORMAT_VERSION,
        "mode": model.mode,
        "emotions": list(model.emotions.labels),
        "speakers": {
            "ids": list(model.speakers.ids),
            "s": model.speakers.s,
            "matrix": [float(v) for v in model.speakers.matrix.ravel()],
        },
        "prosody_net": net_to_dict(model.prosody_net),
    }
    if model.mode == EXTERNAL:
        doc["table"] = {
            "symbols": list(model.table.symbols),
            "k": model.table.k,
            "matrix": [float(v) for v in model.table.matrix.ravel()],
        }
        doc["ed_embedding"] = net_to_dict(model.ed_embedding)
    else:
        doc["predictor"] = predictor_to_dict(model.predictor)
    return doc


def renderer_from_dict(doc: dict) -> RendererModel:
    try:
        spk = doc["speakers"]
        speakers = SpeakerTable(
            ids=tuple(spk["ids"]),
            matrix=np.array(spk["matrix"], dtype=np.float64).reshape(
                len(spk["ids"]), int(spk["s"])))
        emotions = EmotionSet(labels=tuple(doc["emotions"]))
        mode = str(doc["mode"])
        if mode == EXTERNAL:
            tab = doc["table"]
            table = EmbeddingTable(
                symbols=tuple(tab["symbols"]),
                matrix=np.array(tab["matrix"], dtype=np.float64).reshape(
                    len(tab["symbols"]), int(tab["k"])))
            return RendererModel(
                mode=mode, emotions=emotions, speakers=speakers, table=table,
                ed_embedding=net_from_dict(doc["ed_embedding"]),
                prosody_net=net_from_dict(doc["prosody_net"]))
        return RendererModel(
            mode=mode, emotions=emotions, speakers=speakers,
            predictor=predictor_from_dict(doc["predictor"]),
            prosody_net=net_from_dict(doc["prosody_net"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed renderer model: {exc}") from None


def save_renderer(model: RendererModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(renderer_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_renderer(path) -> RendererModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return renderer_from_dict(doc)
