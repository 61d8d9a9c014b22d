"""Utterance/word/phoneme segmentation: value types and file readers.

Alignments come from a forced aligner as Praat TextGrids (long form, tiers
"words" and "phones") or from this package's own JSON format. Silence
intervals are dropped; emotion applies to linguistic units only.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import FormatError, InvalidSegmentation, OrphanPhone

SILENCE_LABELS = frozenset({"", "sil", "sp"})

# phones may overhang their word boundary by this much (forced-aligner jitter)
WORD_SLACK_S = 0.010


@dataclass(frozen=True)
class Phone:
    symbol: str
    start_s: float
    end_s: float
    word_index: int


@dataclass(frozen=True)
class Word:
    """Orthographic token spanning phones[phone_range[0]:phone_range[1]]."""

    text: str
    start_s: float
    end_s: float
    phone_range: tuple


@dataclass(frozen=True)
class Segmentation:
    """One utterance split into ordered, non-overlapping words and phones."""

    utterance_span: tuple
    words: tuple
    phones: tuple

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "phones", tuple(self.phones))
        object.__setattr__(self, "utterance_span", tuple(self.utterance_span))
        _validate(self)


def _validate(seg: Segmentation) -> None:
    if not seg.words:
        raise InvalidSegmentation("utterance must contain at least one word")
    for word in seg.words:
        if not word.start_s < word.end_s:
            raise InvalidSegmentation(f"word '{word.text}' has empty span")
        lo, hi = word.phone_range
        if not lo < hi:
            raise InvalidSegmentation(f"word '{word.text}' has no phones")
    for phone in seg.phones:
        if not phone.start_s < phone.end_s:
            raise InvalidSegmentation(f"phone '{phone.symbol}' has empty span")
    for prev, cur in zip(seg.words, seg.words[1:]):
        if cur.start_s < prev.end_s - 1e-9:
            raise InvalidSegmentation(
                f"words '{prev.text}' and '{cur.text}' overlap or are out of order")
    for prev, cur in zip(seg.phones, seg.phones[1:]):
        if cur.start_s < prev.end_s - 1e-9:
            raise InvalidSegmentation(
                f"phones '{prev.symbol}' and '{cur.symbol}' overlap or are out of order")
    # ranges must tile the phone list in word order
    expect = 0
    for i, word in enumerate(seg.words):
        lo, hi = word.phone_range
        if lo != expect:
            raise InvalidSegmentation(f"word '{word.text}' phone_range is not contiguous")
        for phone in seg.phones[lo:hi]:
            if phone.word_index != i:
                raise InvalidSegmentation(
                    f"phone '{phone.symbol}' does not point back to word {i}")
            if (phone.start_s < word.start_s - WORD_SLACK_S
                    or phone.end_s > word.end_s + WORD_SLACK_S):
                raise InvalidSegmentation(
                    f"phone '{phone.symbol}' lies outside word '{word.text}'")
        expect = hi
    if expect != len(seg.phones):
        raise InvalidSegmentation("phone ranges do not cover the phone list")
    ut0, ut1 = seg.utterance_span
    if ut0 > seg.words[0].start_s + 1e-9 or ut1 < seg.words[-1].end_s - 1e-9:
        raise InvalidSegmentation("utterance span does not cover all words")


def segment_count(seg: Segmentation) -> tuple:
    """(1, word count, phone count)."""
    return (1, len(seg.words), len(seg.phones))


_TIER_NAME_RE = re.compile(r'name\s*=\s*"([^"]*)"')
_XMIN_RE = re.compile(r"xmin\s*=\s*([-\d.eE+]+)")
_XMAX_RE = re.compile(r"xmax\s*=\s*([-\d.eE+]+)")
_TEXT_RE = re.compile(r'text\s*=\s*"((?:[^"]|"")*)"')


def _parse_textgrid_tiers(text: str) -> dict:
    """Tier name -> list of (xmin, xmax, label) for interval tiers."""
    chunks = re.split(r"item\s*\[\d+\]\s*:", text)
    tiers = {}
    for chunk in chunks[1:]:
        name_m = _TIER_NAME_RE.search(chunk)
        if name_m is None or "IntervalTier" not in chunk:
            continue
        intervals = []
        for part in re.split(r"intervals\s*\[\d+\]\s*:", chunk)[1:]:
            xmin_m = _XMIN_RE.search(part)
            xmax_m = _XMAX_RE.search(part)
            text_m = _TEXT_RE.search(part)
            if not (xmin_m and xmax_m and text_m):
                raise FormatError("malformed TextGrid interval")
            label = text_m.group(1).replace('""', '"').strip()
            intervals.append((float(xmin_m.group(1)), float(xmax_m.group(1)), label))
        tiers[name_m.group(1)] = intervals
    return tiers


def parse_textgrid(path) -> Segmentation:
    """Read a long-form Praat TextGrid with "words" and "phones" tiers.

    Silence intervals (empty, "sil", "sp") are dropped from both tiers.
    Each remaining phone is attached to the word whose span contains its
    midpoint (10 ms slack at word edges).
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if "TextGrid" not in text.split("\n", 3)[0] and "ooTextFile" not in text:
        raise FormatError(f"{path}: not a TextGrid file")
    tiers = _parse_textgrid_tiers(text)
    for required in ("words", "phones"):
        if required not in tiers:
            raise FormatError(f"{path}: missing interval tier '{required}'")
    word_iv = [(a, b, t) for a, b, t in tiers["words"]
               if t.lower() not in SILENCE_LABELS]
    phone_iv = [(a, b, t) for a, b, t in tiers["phones"]
                if t.lower() not in SILENCE_LABELS]
    if not word_iv:
        raise InvalidSegmentation(f"{path}: no words after dropping silences")
    return _assemble(word_iv, phone_iv, source=str(path))


def _assemble(word_iv: list, phone_iv: list, source: str) -> Segmentation:
    """Build a Segmentation from (start, end, label) lists via midpoint rule."""
    words = []
    phones = []
    groups = [[] for _ in word_iv]
    for start, end, symbol in phone_iv:
        mid = 0.5 * (start + end)
        owner = None
        for i, (wstart, wend, _) in enumerate(word_iv):
            if wstart - WORD_SLACK_S <= mid < wend + WORD_SLACK_S:
                owner = i
                break
        if owner is None:
            raise OrphanPhone(
                f"{source}: phone '{symbol}' at {mid:.3f}s lies in no word")
        groups[owner].append((start, end, symbol))
    cursor = 0
    for i, (wstart, wend, text) in enumerate(word_iv):
        lo = cursor
        for start, end, symbol in groups[i]:
            phones.append(Phone(symbol=symbol, start_s=start, end_s=end,
                                word_index=i))
            cursor += 1
        words.append(Word(text=text, start_s=wstart, end_s=wend,
                          phone_range=(lo, cursor)))
    span = (words[0].start_s, words[-1].end_s) if words else (0.0, 0.0)
    return Segmentation(utterance_span=span, words=words, phones=phones)


def parse_alignment_json(path) -> Segmentation:
    """Read the native alignment JSON format (see emit_alignment_json)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return segmentation_from_dict(doc, source=str(path))


def segmentation_from_dict(doc: dict, source: str = "<dict>") -> Segmentation:
    try:
        utt = doc["utterance"]
        span = (float(utt["start"]), float(utt["end"]))
        words = []
        phones = []
        for i, w in enumerate(doc["words"]):
            lo = len(phones)
            for p in w["phones"]:
                phones.append(Phone(symbol=str(p["symbol"]),
                                    start_s=float(p["start"]),
                                    end_s=float(p["end"]), word_index=i))
            words.append(Word(text=str(w["text"]), start_s=float(w["start"]),
                              end_s=float(w["end"]),
                              phone_range=(lo, len(phones))))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: malformed alignment document: {exc}") from None
    return Segmentation(utterance_span=span, words=words, phones=phones)


def segmentation_to_dict(seg: Segmentation) -> dict:
    return {
        "utterance": {"start": seg.utterance_span[0], "end": seg.utterance_span[1]},
        "words": [
            {
                "text": w.text,
                "start": w.start_s,
                "end": w.end_s,
                "phones": [
                    {"symbol": p.symbol, "start": p.start_s, "end": p.end_s}
                    for p in seg.phones[w.phone_range[0]:w.phone_range[1]]
                ],
            }
            for w in seg.words
        ],
    }


def emit_alignment_json(seg: Segmentation, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(segmentation_to_dict(seg), fh, indent=2, sort_keys=True)
        fh.write("\n")
