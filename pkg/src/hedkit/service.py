"""HTTP facade over editing sessions for the browser editor.

The service holds sessions in memory and forwards every operation to
the editing module unchanged, so the API has exactly the semantics of
the library: same validation, same downstream policies, same replayable
logs. Model bundles are loaded once at startup and shared read-only
across sessions; per-session mutation is serialized with a lock.

Every session-shaped response carries the full current hierarchical ED
(and the rendered contour when a renderer is loaded) so the UI never
has to track partial state.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .editing import (
    EXTRACTED_FROM_AUDIO,
    PREDICTED_FROM_TEXT,
    SOURCES,
    EditCommand,
    EditSession,
    apply_edit,
    intensity_sweep,
    render_session,
    session_from_hed,
    session_from_text,
    session_to_dict,
)
from .errors import HedkitError, InvalidInput
from .hed import hed_from_dict, hed_to_dict
from .predictor import EdPredictor, load_predictor
from .renderer import RendererModel, contour_to_dict, load_renderer


@dataclass
class _Entry:
    session: EditSession
    speaker: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    created: float = 0.0
    last_used: float = 0.0


class SessionStore:
    """In-memory session map with idle-TTL eviction on access."""

    def __init__(self, ttl_s: float = 3600.0, clock=time.time):
        if ttl_s <= 0:
            raise InvalidInput(f"ttl_s must be positive, got {ttl_s}")
        self.ttl_s = float(ttl_s)
        self.clock = clock
        self._lock = threading.Lock()
        self._entries: dict = {}

    def _evict(self, now: float) -> None:
        dead = [sid for sid, e in self._entries.items()
                if now - e.last_used > self.ttl_s]
        for sid in dead:
            del self._entries[sid]

    def create(self, session: EditSession, speaker: str) -> str:
        sid = uuid.uuid4().hex
        now = float(self.clock())
        with self._lock:
            self._evict(now)
            self._entries[sid] = _Entry(session=session, speaker=speaker,
                                        created=now, last_used=now)
        return sid

    def get(self, sid: str) -> _Entry:
        now = float(self.clock())
        with self._lock:
            self._evict(now)
            entry = self._entries.get(sid)
            if entry is None:
                raise KeyError(sid)
            entry.last_used = now
            return entry

    def drop(self, sid: str) -> None:
        with self._lock:
            if sid not in self._entries:
                raise KeyError(sid)
            del self._entries[sid]

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)


def _parse_words(value) -> tuple:
    """Accept 'AA B, K IY N' or [['AA','B'],['K','IY','N']]."""
    if isinstance(value, str):
        words = []
        for chunk in value.split(","):
            phones = tuple(chunk.split())
            if phones:
                words.append(phones)
        if not words:
            raise InvalidInput("text has no phones")
        return tuple(words)
    try:
        words = tuple(tuple(str(p) for p in w) for w in value)
    except TypeError:
        raise InvalidInput(f"bad word list: {value!r}") from None
    if not words or any(not w for w in words):
        raise InvalidInput("word list must be non-empty words of phones")
    return words


def build_app(predictor_path=None, renderer_path=None, ttl_s: float = 3600.0,
              snapshot_dir: str = "snapshots", clock=time.time) -> FastAPI:
    """Assemble the editing API around optional model bundles.

    predictor_path/renderer_path take a bundle path or an already
    loaded model. Text-input sessions need the predictor; /contour and
    /sweep need the renderer. Bad bundles raise here, before the app
    ever binds a socket.
    """
    predictor = predictor_path
    if predictor is not None and not isinstance(predictor, EdPredictor):
        predictor = load_predictor(predictor)
    renderer = renderer_path
    if renderer is not None and not isinstance(renderer, RendererModel):
        renderer = load_renderer(renderer)

    store = SessionStore(ttl_s=ttl_s, clock=clock)
    app = FastAPI(title="hedkit editor service")
    # the browser editor is served from its own origin, so the API must
    # answer cross-origin requests; sessions carry no credentials
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.store = store
    app.state.predictor = predictor
    app.state.renderer = renderer

    def entry_of(sid: str) -> _Entry:
        try:
            return store.get(sid)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown session '{sid}'") from None

    def session_doc(sid: str, entry: _Entry) -> dict:
        session = entry.session
        doc = {
            "session_id": sid,
            "source": session.source,
            "speaker": entry.speaker,
            "log_length": len(session.log),
            "hed": hed_to_dict(session.current),
        }
        if session.words is not None:
            doc["words"] = [list(w) for w in session.words]
        if renderer is not None:
            contour = render_session(session, renderer, entry.speaker)
            doc["contour"] = contour_to_dict(contour)
        return doc

    def pick_speaker(payload: dict) -> str:
        speaker = payload.get("speaker")
        if speaker is None:
            return renderer.speakers.ids[0] if renderer is not None else ""
        return str(speaker)

    @app.exception_handler(HedkitError)
    async def _domain_error(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(IndexError)
    async def _index_error(request, exc):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(Exception)
    async def _internal_error(request, exc):
        # opaque id links the response to server logs without leaking
        # internals to the client
        err_id = uuid.uuid4().hex[:12]
        return JSONResponse(status_code=500,
                            content={"detail": "internal error",
                                     "error_id": err_id})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        mode = payload.get("mode")
        if mode is not None and mode not in SOURCES:
            raise InvalidInput(f"unknown session mode '{mode}'")
        if "hed" in payload:
            hed = hed_from_dict(payload["hed"])
            raw = payload.get("words", payload.get("text"))
            if raw is None:
                raise InvalidInput(
                    "hed payload needs 'words' or 'text' for structure")
            words = _parse_words(raw)
            session = session_from_hed(
                hed, words=words, predictor=predictor,
                source=mode or EXTRACTED_FROM_AUDIO, clock=clock)
        elif "text" in payload:
            if mode is not None and mode != PREDICTED_FROM_TEXT:
                raise InvalidInput(
                    f"text payloads are always '{PREDICTED_FROM_TEXT}'")
            if predictor is None:
                raise InvalidInput(
                    "text sessions need a predictor bundle loaded")
            words = _parse_words(payload["text"])
            session = session_from_text(predictor, words, clock=clock)
        else:
            raise InvalidInput("payload needs 'text' or 'hed'")
        speaker = pick_speaker(payload)
        sid = store.create(session, speaker)
        entry = store.get(sid)
        with entry.lock:
            return session_doc(sid, entry)

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        entry = entry_of(sid)
        with entry.lock:
            return session_doc(sid, entry)

    @app.post("/sessions/{sid}/edits")
    def post_edit(sid: str, payload: dict = Body(...)):
        entry = entry_of(sid)
        cmd = EditCommand(
            level=payload.get("level"),
            index=payload.get("index", 0),
            emotion=str(payload.get("emotion")),
            value=payload.get("value"),
            downstream_policy=payload.get("downstream_policy", "hold"))
        with entry.lock:
            apply_edit(entry.session, cmd)
            return session_doc(sid, entry)

    @app.post("/sessions/{sid}/sweep")
    def post_sweep(sid: str, payload: dict = Body(...)):
        if renderer is None:
            raise InvalidInput("sweeps need a renderer bundle loaded")
        entry = entry_of(sid)
        raw = payload.get("template")
        if raw is None:
            raise InvalidInput("sweep needs a 'template' edit command")
        raw = raw if isinstance(raw, list) else [raw]
        templates = [
            EditCommand(
                level=t.get("level"), index=t.get("index", 0),
                emotion=str(t.get("emotion")), value=t.get("value", 0.0),
                downstream_policy=t.get("downstream_policy", "hold"))
            for t in raw
        ]
        values = payload.get("values")
        if not isinstance(values, list) or not values:
            raise InvalidInput("sweep needs a non-empty 'values' list")
        values = [float(v) for v in values]
        scope = payload.get("scope", "utterance")
        speaker = str(payload.get("speaker", entry.speaker))
        with entry.lock:
            points = intensity_sweep(entry.session, templates, values,
                                     renderer, scope=scope,
                                     speaker_id=speaker)
        return {
            "session_id": sid,
            "scope": scope,
            "sweep": [dict(stats, value=value) for value, stats in points],
        }

    @app.get("/sessions/{sid}/contour")
    def get_contour(sid: str, speaker: str | None = None):
        if renderer is None:
            raise InvalidInput("contours need a renderer bundle loaded")
        entry = entry_of(sid)
        with entry.lock:
            contour = render_session(entry.session, renderer,
                                     speaker or entry.speaker)
        return {"session_id": sid, "contour": contour_to_dict(contour)}

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        try:
            store.drop(sid)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown session '{sid}'") from None
        return Response(status_code=204)

    @app.post("/sessions/{sid}/save")
    def save_session(sid: str):
        entry = entry_of(sid)
        os.makedirs(snapshot_dir, exist_ok=True)
        path = os.path.join(snapshot_dir, f"{sid}.json")
        with entry.lock:
            doc = session_to_dict(entry.session)
        tmp = f"{path}.tmp{os.getpid()}"
        try:
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return {"session_id": sid, "path": path}

    return app
