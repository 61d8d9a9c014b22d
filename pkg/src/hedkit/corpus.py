"""Deterministic synthetic emotional corpora with known ED-to-prosody rules.

Each item is a phoneme-level "utterance" whose target contour is computed
by a linear rule: every emotion shifts pitch/energy/log-duration in
proportion to its EFFECTIVE intensity, the mean of the utterance, word,
and phoneme values. Averaging the levels makes every level causally
potent, so edits at any level move the rendered prosody, and the rule's
signs (Sad slower/lower, Happy higher-pitched, ...) give controllability
tests an exact oracle.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .alignment import Phone, Segmentation, Word, segmentation_from_dict, \
    segmentation_to_dict
from .errors import ConfigError, FormatError
from .hed import HierarchicalED, hed_from_dict, hed_to_dict
from .ranker import EmotionSet
from .renderer import ProsodyContour, contour_from_dict, contour_to_dict
from .signal import AudioClip, write_wav, read_wav

CORPUS_FORMAT_VERSION = 1

DEFAULT_INVENTORY = (
    "AA", "AE", "AH", "AO", "EH", "IY", "UW", "OW",
    "B", "D", "G", "K", "L", "M", "N", "R", "S", "T", "V", "Z",
)

# per unit of effective intensity: (d pitch log-Hz, d log-energy, d log-duration)
DEFAULT_RULES = {
    "Angry": (0.20, 0.50, -0.05),
    "Happy": (0.25, 0.25, -0.05),
    "Sad": (-0.30, -0.40, 0.30),
    "Surprise": (0.35, 0.45, 0.0),
}

NEUTRAL_LABEL = "Neutral"

BASE_PITCH_LOG = float(np.log(160.0))
BASE_ENERGY_LOG = float(np.log(0.10))
BASE_LOGDUR = float(np.log(0.12))

# fixed per-speaker pitch offset step, in log-Hz
SPEAKER_PITCH_STEP = 0.08

HARMONIC_AMPS = (0.8, 0.15, 0.05)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_items: int = 50
    rules: dict = field(default_factory=lambda: dict(DEFAULT_RULES))
    inventory: tuple = DEFAULT_INVENTORY
    emotions: EmotionSet = EmotionSet()
    speakers: tuple = ("spk0", "spk1")
    n_words_range: tuple = (2, 5)
    word_len_range: tuple = (1, 4)
    hier_noise: float = 0.2
    independent_frac: float = 0.3
    with_audio: bool = True
    sample_rate: int = 16000

    def __post_init__(self):
        if self.n_items < 1:
            raise ConfigError("n_items must be at least 1")
        if not self.inventory:
            raise ConfigError("phoneme inventory must be non-empty")
        if not self.speakers:
            raise ConfigError("need at least one speaker")
        for emotion in self.emotions.labels:
            rule = self.rules.get(emotion)
            if rule is None or len(rule) != 3 or not all(
                    np.isfinite(v) for v in rule):
                raise ConfigError(f"rule for '{emotion}' missing or non-finite")
        lo, hi = self.n_words_range
        if not 1 <= lo <= hi:
            raise ConfigError("bad n_words_range")
        lo, hi = self.word_len_range
        if not 1 <= lo <= hi:
            raise ConfigError("bad word_len_range")
        object.__setattr__(self, "rules", dict(self.rules))
        object.__setattr__(self, "inventory", tuple(self.inventory))
        object.__setattr__(self, "speakers", tuple(str(s) for s in self.speakers))


@dataclass(frozen=True)
class CorpusItem:
    item_id: str
    label: str  # dominant emotion or Neutral
    speaker_id: str
    words: tuple  # tuple of tuples of phone symbols
    seg: Segmentation
    hed: HierarchicalED
    contour: ProsodyContour
    clip: AudioClip = None

    def __eq__(self, other):
        if not isinstance(other, CorpusItem):
            return NotImplemented
        same = (self.item_id == other.item_id and self.label == other.label
                and self.speaker_id == other.speaker_id
                and self.words == other.words and self.seg == other.seg
                and self.hed == other.hed and self.contour == other.contour)
        if not same:
            return False
        if (self.clip is None) != (other.clip is None):
            return False
        if self.clip is None:
            return True
        return (self.clip.sample_rate == other.clip.sample_rate
                and np.array_equal(self.clip.samples, other.clip.samples))


def speaker_pitch_offset(spec: SynthSpec, speaker_id: str) -> float:
    return SPEAKER_PITCH_STEP * spec.speakers.index(str(speaker_id))


def effective_intensity(hed: HierarchicalED, word_ranges) -> np.ndarray:
    """(P, E) per-phone mean of utterance, owning-word, and phoneme EDs."""
    out = np.empty_like(hed.phones)
    for w, (lo, hi) in enumerate(word_ranges):
        out[lo:hi] = (hed.utterance + hed.words[w] + hed.phones[lo:hi]) / 3.0
    return out


def contour_from_rules(spec: SynthSpec, words, hed: HierarchicalED,
                       speaker_id: str) -> ProsodyContour:
    """The ground-truth rule map: EDs to the target prosody contour."""
    ranges = []
    symbols = []
    for word in words:
        lo = len(symbols)
        symbols.extend(word)
        ranges.append((lo, len(symbols)))
    m = effective_intensity(hed, ranges)
    deltas = np.array([spec.rules[e] for e in hed.emotions.labels])  # (E, 3)
    effect = m @ deltas  # (P, 3)
    pitch = BASE_PITCH_LOG + speaker_pitch_offset(spec, speaker_id) + effect[:, 0]
    energy = BASE_ENERGY_LOG + effect[:, 1]
    duration = np.exp(BASE_LOGDUR + effect[:, 2])
    return ProsodyContour(phones=tuple(symbols), pitch_log_hz=pitch,
                          energy_log=energy, duration_s=duration)


def _segmentation_from_contour(words, contour: ProsodyContour) -> Segmentation:
    """Contiguous timing: phone boundaries at cumulative durations."""
    bounds = np.concatenate([[0.0], np.cumsum(contour.duration_s)])
    phones = []
    word_objs = []
    p = 0
    for wi, word in enumerate(words):
        lo = p
        for sym in word:
            phones.append(Phone(symbol=sym, start_s=float(bounds[p]),
                                end_s=float(bounds[p + 1]), word_index=wi))
            p += 1
        word_objs.append(Word(text="w%d" % wi, start_s=float(bounds[lo]),
                              end_s=float(bounds[p]), phone_range=(lo, p)))
    return Segmentation(utterance_span=(0.0, float(bounds[-1])),
                        words=word_objs, phones=phones)


def synthesize_audio(contour: ProsodyContour, sample_rate: int) -> AudioClip:
    """Harmonic tone following the contour, phase-continuous across phones.

    Per phone the three-harmonic tone is RMS-scaled to exp(energy_log).
    Samples are quantized to the 16-bit grid immediately so a WAV round
    trip is lossless.
    """
    bounds = np.round(np.cumsum(np.concatenate([[0.0], contour.duration_s]))
                      * sample_rate).astype(int)
    total = bounds[-1]
    samples = np.zeros(total)
    phase = 0.0
    for p in range(len(contour)):
        lo, hi = bounds[p], bounds[p + 1]
        n = hi - lo
        if n <= 0:
            continue
        f0 = np.exp(contour.pitch_log_hz[p])
        phases = phase + 2.0 * np.pi * f0 / sample_rate * np.arange(1, n + 1)
        raw = np.zeros(n)
        for h, amp in enumerate(HARMONIC_AMPS, start=1):
            raw += amp * np.sin(h * phases)
        rms = np.sqrt(np.mean(raw ** 2))
        if rms > 0:
            raw *= np.exp(contour.energy_log[p]) / rms
        samples[lo:hi] = raw
        phase = phases[-1]
    quantized = np.clip(np.round(samples * 32768.0), -32768, 32767) / 32768.0
    return AudioClip(samples=quantized, sample_rate=sample_rate)


def _sample_text(rng, spec: SynthSpec):
    n_words = int(rng.integers(spec.n_words_range[0], spec.n_words_range[1] + 1))
    words = []
    for _ in range(n_words):
        n = int(rng.integers(spec.word_len_range[0], spec.word_len_range[1] + 1))
        words.append(tuple(str(s) for s in rng.choice(spec.inventory, size=n)))
    return tuple(words)


def _sample_hed(rng, spec: SynthSpec, label: str, n_words: int,
                n_phones: int, word_ranges) -> HierarchicalED:
    e = spec.emotions.size
    lo, hi = 0.02, 0.98
    utt = rng.uniform(0.02, 0.3, e)
    if label != NEUTRAL_LABEL:
        utt[spec.emotions.index(label)] = rng.uniform(0.6, 0.95)
    if rng.random() < spec.independent_frac:
        words = rng.uniform(lo, hi, (n_words, e))
        phones = rng.uniform(lo, hi, (n_phones, e))
    else:
        words = np.clip(utt + rng.normal(0.0, spec.hier_noise, (n_words, e)),
                        lo, hi)
        phones = np.empty((n_phones, e))
        for w, (plo, phi) in enumerate(word_ranges):
            phones[plo:phi] = np.clip(
                words[w] + rng.normal(0.0, spec.hier_noise, (phi - plo, e)),
                lo, hi)
    return HierarchicalED(utterance=np.clip(utt, lo, hi), words=words,
                          phones=phones, emotions=spec.emotions)


def generate(spec: SynthSpec) -> list:
    """Deterministic corpus: same spec, same items, bit for bit."""
    rng = np.random.default_rng(spec.seed)
    labels = list(spec.emotions.labels) + [NEUTRAL_LABEL]
    items = []
    for i in range(spec.n_items):
        label = labels[int(rng.integers(0, len(labels)))]
        speaker = spec.speakers[int(rng.integers(0, len(spec.speakers)))]
        words = _sample_text(rng, spec)
        ranges = []
        p = 0
        for word in words:
            ranges.append((p, p + len(word)))
            p += len(word)
        hed = _sample_hed(rng, spec, label, len(words), p, ranges)
        contour = contour_from_rules(spec, words, hed, speaker)
        seg = _segmentation_from_contour(words, contour)
        clip = (synthesize_audio(contour, spec.sample_rate)
                if spec.with_audio else None)
        items.append(CorpusItem(item_id=f"{i:04d}", label=label,
                                speaker_id=speaker, words=words, seg=seg,
                                hed=hed, contour=contour, clip=clip))
    return items


def spec_to_dict(spec: SynthSpec) -> dict:
    return {
        "seed": spec.seed,
        "n_items": spec.n_items,
        "rules": {k: list(map(float, v)) for k, v in sorted(spec.rules.items())},
        "inventory": list(spec.inventory),
        "emotions": list(spec.emotions.labels),
        "speakers": list(spec.speakers),
        "n_words_range": list(spec.n_words_range),
        "word_len_range": list(spec.word_len_range),
        "hier_noise": spec.hier_noise,
        "independent_frac": spec.independent_frac,
        "with_audio": spec.with_audio,
        "sample_rate": spec.sample_rate,
    }


def spec_from_dict(doc: dict) -> SynthSpec:
    try:
        return SynthSpec(
            seed=int(doc["seed"]), n_items=int(doc["n_items"]),
            rules={k: tuple(v) for k, v in doc["rules"].items()},
            inventory=tuple(doc["inventory"]),
            emotions=EmotionSet(labels=tuple(doc["emotions"])),
            speakers=tuple(doc["speakers"]),
            n_words_range=tuple(doc["n_words_range"]),
            word_len_range=tuple(doc["word_len_range"]),
            hier_noise=float(doc["hier_noise"]),
            independent_frac=float(doc["independent_frac"]),
            with_audio=bool(doc["with_audio"]),
            sample_rate=int(doc["sample_rate"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed corpus spec: {exc}") from None


def save_corpus(path, items, spec: SynthSpec) -> None:
    """Directory layout: manifest.json + items/NNNN.json (+ NNNN.wav)."""
    items_dir = os.path.join(path, "items")
    os.makedirs(items_dir, exist_ok=True)
    for item in items:
        doc = {
            "label": item.label,
            "speaker_id": item.speaker_id,
            "words": [list(w) for w in item.words],
            "segmentation": segmentation_to_dict(item.seg),
            "hed": hed_to_dict(item.hed),
            "contour": contour_to_dict(item.contour),
            "has_audio": item.clip is not None,
        }
        with open(os.path.join(items_dir, f"{item.item_id}.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if item.clip is not None:
            write_wav(os.path.join(items_dir, f"{item.item_id}.wav"), item.clip)
    manifest = {
        "version": CORPUS_FORMAT_VERSION,
        "n_items": len(items),
        "spec": spec_to_dict(spec),
    }
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_corpus(path):
    """Returns (spec, items). Raises FormatError on missing/corrupt pieces."""
    manifest_path = os.path.join(path, "manifest.json")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"{path}: missing manifest.json") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: {exc}") from None
    try:
        n_items = int(manifest["n_items"])
        spec = spec_from_dict(manifest["spec"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{manifest_path}: {exc}") from None
    items = []
    for i in range(n_items):
        item_id = f"{i:04d}"
        item_path = os.path.join(path, "items", f"{item_id}.json")
        try:
            with open(item_path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise FormatError(f"{path}: missing item {item_id}") from None
        except json.JSONDecodeError as exc:
            raise FormatError(f"{item_path}: {exc}") from None
        try:
            words = tuple(tuple(str(s) for s in w) for w in doc["words"])
            clip = None
            if doc.get("has_audio"):
                clip = read_wav(os.path.join(path, "items", f"{item_id}.wav"))
            items.append(CorpusItem(
                item_id=item_id, label=str(doc["label"]),
                speaker_id=str(doc["speaker_id"]), words=words,
                seg=segmentation_from_dict(doc["segmentation"], source=item_path),
                hed=hed_from_dict(doc["hed"]),
                contour=contour_from_dict(doc["contour"]), clip=clip))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{item_path}: {exc}") from None
    return spec, items
