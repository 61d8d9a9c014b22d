"""Runtime emotion control: edit hierarchical EDs and re-render.

A session wraps one utterance's ED plus whatever produced it (a predictor
for text input, a segmentation for audio-extracted EDs). Edits target a
single (level, index, emotion) scalar. Downstream policy "hold" leaves
lower levels alone; "repredict" re-runs the attached predictor on the
strictly lower levels, conditioning on the edited upstream values,
while preserving any entries the user has edited by hand before.

The edit log is replayable: applying it to the base ED reproduces the
live state bit for bit, which is what undo, audit, and the service's
snapshot endpoint lean on.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .alignment import Segmentation
from .errors import ConfigError, InvalidInput, PolicyError, ReplayError
from .hed import HierarchicalED, hed_from_dict, hed_to_dict
from .predictor import (
    EdPredictor,
    TextEncoding,
    encode,
    predict,
    predict_phones,
    predict_words,
)
from .renderer import (
    ProsodyContour,
    RendererModel,
    aligned_from_ranges,
    contour_stats,
    render,
)

UTTERANCE = "utterance"
WORD = "word"
PHONEME = "phoneme"
LEVELS = (UTTERANCE, WORD, PHONEME)

HOLD = "hold"
REPREDICT = "repredict"
POLICIES = (HOLD, REPREDICT)

PREDICTED_FROM_TEXT = "predicted_from_text"
EXTRACTED_FROM_AUDIO = "extracted_from_audio"
SOURCES = (PREDICTED_FROM_TEXT, EXTRACTED_FROM_AUDIO)


@dataclass(frozen=True)
class EditCommand:
    level: str
    emotion: str
    value: float
    index: int = 0  # ignored for utterance level
    downstream_policy: str = HOLD

    def __post_init__(self):
        if self.level not in LEVELS:
            raise InvalidInput(f"unknown level '{self.level}'")
        if self.downstream_policy not in POLICIES:
            raise InvalidInput(f"unknown policy '{self.downstream_policy}'")
        try:
            value = float(self.value)
            index = int(self.index)
        except (TypeError, ValueError):
            raise InvalidInput(
                f"value {self.value!r} / index {self.index!r} must be "
                f"numeric") from None
        if not np.isfinite(value) or not 0.0 <= value <= 1.0:
            raise InvalidInput(f"value {self.value!r} outside [0, 1]")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "index", index)


def command_to_dict(cmd: EditCommand) -> dict:
    return {
        "level": cmd.level,
        "index": cmd.index,
        "emotion": cmd.emotion,
        "value": cmd.value,
        "downstream_policy": cmd.downstream_policy,
    }


def command_from_dict(doc: dict) -> EditCommand:
    try:
        return EditCommand(
            level=str(doc["level"]), index=int(doc["index"]),
            emotion=str(doc["emotion"]), value=float(doc["value"]),
            downstream_policy=str(doc["downstream_policy"]))
    except (KeyError, TypeError, ValueError, InvalidInput) as exc:
        raise ReplayError(f"bad edit record: {exc}") from None


@dataclass
class EditSession:
    source: str
    base: HierarchicalED
    current: HierarchicalED
    enc: TextEncoding = None
    seg: Segmentation = None
    words: tuple = None  # literal phone symbols per word, when known
    predictor: EdPredictor = None
    log: list = field(default_factory=list)  # (timestamp, EditCommand)
    clock: object = time.time
    manual_utt: np.ndarray = None
    manual_words: np.ndarray = None
    manual_phones: np.ndarray = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise InvalidInput(f"unknown session source '{self.source}'")
        if self.words is not None:
            self.words = tuple(tuple(str(p) for p in w) for w in self.words)
        if self.enc is None and self.seg is None and self.words is None:
            raise ConfigError(
                "session needs a TextEncoding, a Segmentation, or word "
                "symbols")
        if self.enc is not None:
            counts = (self.enc.n_words, self.enc.n_phones)
        elif self.seg is not None:
            counts = (len(self.seg.words), len(self.seg.phones))
        else:
            counts = (len(self.words), sum(len(w) for w in self.words))
        if (self.base.n_words, self.base.n_phones) != counts:
            raise ConfigError(
                f"ED shape {self.base.n_words}w/{self.base.n_phones}p does "
                f"not match the text ({counts[0]}w/{counts[1]}p)")
        if self.manual_utt is None:
            self.manual_utt = np.zeros_like(self.base.utterance, dtype=bool)
            self.manual_words = np.zeros_like(self.base.words, dtype=bool)
            self.manual_phones = np.zeros_like(self.base.phones, dtype=bool)

    @property
    def word_ranges(self) -> tuple:
        if self.enc is not None:
            return self.enc.word_phone_ranges
        if self.seg is not None:
            return tuple(w.phone_range for w in self.seg.words)
        ranges, lo = [], 0
        for w in self.words:
            ranges.append((lo, lo + len(w)))
            lo += len(w)
        return tuple(ranges)

    def aligned(self):
        """The replication matrix for the live state."""
        return aligned_from_ranges(self.current, self.word_ranges)

    def copy(self) -> "EditSession":
        return EditSession(
            source=self.source, base=self.base, current=self.current.copy(),
            enc=self.enc, seg=self.seg, words=self.words,
            predictor=self.predictor, log=list(self.log), clock=self.clock,
            manual_utt=self.manual_utt.copy(),
            manual_words=self.manual_words.copy(),
            manual_phones=self.manual_phones.copy())


def session_from_text(predictor: EdPredictor, words,
                      clock=time.time) -> EditSession:
    """Scenario 1: the ED comes straight from the text predictor."""
    words = tuple(tuple(w) for w in words)
    enc = encode(predictor.table, words)
    hed = predict(predictor, enc)
    return EditSession(source=PREDICTED_FROM_TEXT, base=hed,
                       current=hed.copy(), enc=enc, words=words,
                       predictor=predictor, clock=clock)


def session_from_hed(hed: HierarchicalED, enc: TextEncoding = None,
                     seg: Segmentation = None, words=None,
                     predictor: EdPredictor = None,
                     source: str = EXTRACTED_FROM_AUDIO,
                     clock=time.time) -> EditSession:
    """Scenario 3: an extracted (or otherwise supplied) ED, manually edited."""
    if words is not None:
        words = tuple(tuple(w) for w in words)
    return EditSession(source=source, base=hed, current=hed.copy(), enc=enc,
                       seg=seg, words=words, predictor=predictor, clock=clock)


def _apply(session: EditSession, cmd: EditCommand, mark_manual=True) -> None:
    """Mutate session.current per one command; no log bookkeeping."""
    e_idx = session.current.emotions.index(cmd.emotion)
    utt = session.current.utterance.copy()
    words = session.current.words.copy()
    phones = session.current.phones.copy()

    if cmd.level == UTTERANCE:
        utt[e_idx] = cmd.value
        if mark_manual:
            session.manual_utt[e_idx] = True
    elif cmd.level == WORD:
        if not 0 <= cmd.index < words.shape[0]:
            raise IndexError(
                f"word index {cmd.index} out of range for "
                f"{words.shape[0]} words")
        words[cmd.index, e_idx] = cmd.value
        if mark_manual:
            session.manual_words[cmd.index, e_idx] = True
    else:
        if not 0 <= cmd.index < phones.shape[0]:
            raise IndexError(
                f"phoneme index {cmd.index} out of range for "
                f"{phones.shape[0]} phones")
        phones[cmd.index, e_idx] = cmd.value
        if mark_manual:
            session.manual_phones[cmd.index, e_idx] = True

    if cmd.downstream_policy == REPREDICT:
        if session.predictor is None:
            raise PolicyError("repredict needs an attached predictor")
        if session.enc is None and session.words is not None:
            session.enc = encode(session.predictor.table, session.words)
        if session.enc is None:
            raise PolicyError("repredict needs the session's text encoding")
        if cmd.level == UTTERANCE:
            fresh = predict_words(session.predictor, session.enc, utt)
            words = np.where(session.manual_words, words, fresh)
        if cmd.level in (UTTERANCE, WORD):
            fresh = predict_phones(session.predictor, session.enc, words, utt)
            phones = np.where(session.manual_phones, phones, fresh)

    session.current = HierarchicalED(utterance=utt, words=words,
                                     phones=phones,
                                     emotions=session.current.emotions)


def apply_edit(session: EditSession, cmd: EditCommand) -> EditSession:
    """Apply one edit, appending it to the session log."""
    _apply(session, cmd)
    session.log.append((float(session.clock()), cmd))
    return session


def replay(session: EditSession) -> HierarchicalED:
    """Re-run the log from the base ED; must reproduce session.current."""
    scratch = EditSession(
        source=session.source, base=session.base,
        current=session.base.copy(), enc=session.enc, seg=session.seg,
        words=session.words, predictor=session.predictor,
        clock=session.clock)
    for record in session.log:
        try:
            _, cmd = record
        except (TypeError, ValueError):
            raise ReplayError(f"malformed log record: {record!r}") from None
        if not isinstance(cmd, EditCommand):
            raise ReplayError(f"malformed log record: {record!r}")
        _apply(scratch, cmd)
    return scratch.current


def _render_encoding(session: EditSession,
                     renderer: RendererModel) -> TextEncoding:
    """Encode the session's text against the RENDERER's own table.

    The session's stored encoding may come from a different predictor
    bundle; prosody nets only make sense with the embeddings they were
    trained against, so re-encode from symbols whenever we have them.
    """
    if session.words is not None:
        return encode(renderer.table, session.words)
    if session.seg is not None:
        words = []
        for w in session.seg.words:
            lo, hi = w.phone_range
            words.append(tuple(p.symbol for p in session.seg.phones[lo:hi]))
        return encode(renderer.table, words)
    return session.enc


def intensity_sweep(session: EditSession, template, values,
                    renderer: RendererModel, scope="utterance",
                    speaker_id: str = None) -> list:
    """Render the session at each intensity value and report contour stats.

    template is one EditCommand or a sequence applied together (for
    compound scopes like word+phoneme). The session itself is untouched;
    every value starts from a fresh copy of the live state.
    """
    templates = ([template] if isinstance(template, EditCommand)
                 else list(template))
    if speaker_id is None:
        speaker_id = renderer.speakers.ids[0]
    enc = _render_encoding(session, renderer)
    out = []
    for value in values:
        work = session.copy()
        for cmd in templates:
            apply_edit(work, replace(cmd, value=float(value)))
        contour = render(renderer, enc,
                         aligned_from_ranges(work.current, enc.word_phone_ranges),
                         speaker_id)
        out.append((float(value), contour_stats(contour, enc, scope)))
    return out


def render_session(session: EditSession, renderer: RendererModel,
                   speaker_id: str = None) -> ProsodyContour:
    """Render the live state of a session."""
    if speaker_id is None:
        speaker_id = renderer.speakers.ids[0]
    enc = _render_encoding(session, renderer)
    return render(renderer, enc,
                  aligned_from_ranges(session.current, enc.word_phone_ranges),
                  speaker_id)


def save_edit_log(session: EditSession, path) -> None:
    """JSON lines, one timestamped command per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for ts, cmd in session.log:
            record = {"timestamp": ts}
            record.update(command_to_dict(cmd))
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_edit_log(path) -> list:
    """Returns [(timestamp, EditCommand), ...]; ReplayError when corrupt."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                ts = float(doc.get("timestamp", 0.0))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ReplayError(f"{path}:{line_no}: {exc}") from None
            records.append((ts, command_from_dict(doc)))
    return records


def session_to_dict(session: EditSession) -> dict:
    """Snapshot: base ED plus the log (current state is replay-derived)."""
    log = []
    for ts, cmd in session.log:
        record = {"timestamp": ts}
        record.update(command_to_dict(cmd))
        log.append(record)
    doc = {
        "source": session.source,
        "base": hed_to_dict(session.base),
        "current": hed_to_dict(session.current),
        "log": log,
    }
    if session.words is not None:
        doc["words"] = [list(w) for w in session.words]
    return doc


def session_from_dict(doc: dict, enc: TextEncoding = None,
                      seg: Segmentation = None,
                      predictor: EdPredictor = None,
                      clock=time.time) -> EditSession:
    """Rebuild a session from a snapshot by replaying its log."""
    try:
        source = str(doc["source"])
        base = hed_from_dict(doc["base"])
        log_docs = list(doc["log"])
        words = doc.get("words")
        if words is not None:
            words = tuple(tuple(str(p) for p in w) for w in words)
    except (KeyError, TypeError, ValueError) as exc:
        raise ReplayError(f"bad session snapshot: {exc}") from None
    session = EditSession(source=source, base=base, current=base.copy(),
                          enc=enc, seg=seg, words=words,
                          predictor=predictor, clock=clock)
    for record in log_docs:
        try:
            ts = float(record["timestamp"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ReplayError(f"bad session snapshot: {exc}") from None
        cmd = command_from_dict(record)
        _apply(session, cmd)
        session.log.append((ts, cmd))
    if "current" in doc:
        want = hed_from_dict(doc["current"])
        if want != session.current:
            raise ReplayError("snapshot current ED does not match its log")
    return session
