"""HTTP surface over the session workflow.

Slow provider work (brief processing, edits) returns 202 immediately and
reports progress through the per-session event stream; selection and reads
are synchronous. Domain errors map onto four statuses: 404 unknown session,
409 illegal in the current state, 422 malformed request, 502 provider
failure.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading

from fastapi import BackgroundTasks, FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from conceptstudio.editor import EditKind, EditTransaction
from conceptstudio.errors import (
    ConceptStudioError,
    IllegalState,
    InvalidTransition,
    PreconditionError,
    UnknownSession,
)
from conceptstudio.model.raster import SketchDocument, Stroke
from conceptstudio.model.session import SessionState
from conceptstudio.service.workflow import SessionManager

_CONFLICTS = (InvalidTransition, IllegalState)
_BAD_REQUESTS = (PreconditionError,)


def _status_for(exc: ConceptStudioError) -> int:
    if isinstance(exc, UnknownSession):
        return 404
    if isinstance(exc, _CONFLICTS):
        return 409
    if isinstance(exc, _BAD_REQUESTS):
        return 422
    return 502  # provider and pipeline failures


class BriefBody(BaseModel):
    transcript: str = ""
    audio_b64: str | None = None


class SelectBody(BaseModel):
    index: int


class EditBody(BaseModel):
    kind: str = Field(pattern="^(recommendation|sketch)$")
    function: str
    chosen: str | None = None
    strokes: list[dict] | None = None
    transcript: str = ""


def _doc_summary(doc) -> dict:
    return {
        "session_id": doc.session_id,
        "state": doc.record.state.value,
        "candidate_count": doc.record.candidate_count,
        "selected_index": doc.record.selected_index,
        "category": doc.category,
        "candidates": list(doc.candidate_hashes),
        "version": doc.current_version,
        "versions": list(doc.versions),
        "legend": dict(doc.legend),
        "overlay": doc.overlay_hash,
        "history": list(doc.record.history),
        "transactions": [t.to_dict() for t in doc.transactions],
    }


def _sse_line(message) -> str:
    return (
        f"id: {message.seq}\n"
        f"event: {message.kind.value}\n"
        f"data: {json.dumps(message.to_dict(), sort_keys=True)}\n\n"
    )


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="concept design service")
    bus = manager.bus

    @app.exception_handler(ConceptStudioError)
    async def domain_error(request: Request, exc: ConceptStudioError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"detail": str(exc), "type": type(exc).__name__},
        )

    @app.post("/sessions", status_code=201)
    def create_session():
        doc = manager.create()
        return {"session_id": doc.session_id, "state": doc.record.state.value}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _doc_summary(manager.get(session_id))

    @app.put("/sessions/{session_id}/sketch")
    def put_sketch(session_id: str, body: dict):
        sketch = SketchDocument.from_dict(body)
        doc = manager.put_sketch(session_id, sketch)
        return {"state": doc.record.state.value, "strokes": len(sketch.strokes)}

    @app.post("/sessions/{session_id}/brief", status_code=202)
    def post_brief(session_id: str, body: BriefBody, background: BackgroundTasks):
        doc = manager.get(session_id)  # 404 before accepting
        if doc.record.at_least(SessionState.DECOMPOSED):
            # same guard run_brief applies, surfaced before the 202
            raise InvalidTransition(doc.record.state.value, "brief")
        audio = None
        if body.audio_b64 is not None:
            try:
                audio = base64.b64decode(body.audio_b64, validate=True)
            except binascii.Error as exc:
                raise PreconditionError(f"audio_b64 is not valid base64: {exc}")
        if audio is None and not body.transcript.strip():
            raise PreconditionError("brief needs a transcript or audio")

        def work():
            try:
                manager.run_brief(session_id, transcript=body.transcript, audio=audio)
            except ConceptStudioError:
                pass  # already reported on the event stream

        background.add_task(work)
        return {"session_id": session_id, "accepted": True}

    @app.post("/sessions/{session_id}/select")
    def post_select(session_id: str, body: SelectBody):
        doc = manager.select(session_id, body.index)
        return {
            "state": doc.record.state.value,
            "selected_index": doc.record.selected_index,
            "version": doc.current_version,
            "chart": doc.chart.to_dict(),
            "legend": dict(doc.legend),
            "overlay": doc.overlay_hash,
        }

    @app.get("/sessions/{session_id}/chart")
    def get_chart(session_id: str):
        doc = manager.get(session_id)
        if doc.chart is None:
            raise IllegalState(
                f"no chart before decomposition (state {doc.record.state.value})",
                state=doc.record.state.value,
            )
        return doc.chart.to_dict()

    @app.post("/sessions/{session_id}/edits", status_code=202)
    def post_edit(session_id: str, body: EditBody, background: BackgroundTasks):
        kind = EditKind(body.kind)
        strokes = None
        if body.strokes is not None:
            strokes = [Stroke.from_dict(s) for s in body.strokes]
        pending = manager.begin_edit(
            session_id,
            kind=kind,
            function=body.function,
            chosen=body.chosen,
            strokes=strokes,
            transcript=body.transcript,
        )

        def work(txn: EditTransaction = pending):
            try:
                manager.finish_edit(session_id, txn)
            except ConceptStudioError:
                pass  # outcome lands in the transaction and event stream

        background.add_task(work)
        return {"edit_id": pending.edit_id, "status": pending.status.value}

    @app.get("/sessions/{session_id}/image")
    def get_image(session_id: str, version: int | None = None):
        doc = manager.get(session_id)
        data = manager.store.get_blob_bytes(doc.image_hash(version))
        return Response(content=data, media_type="image/png")

    @app.get("/sessions/{session_id}/candidates/{index}/image")
    def get_candidate_image(session_id: str, index: int):
        doc = manager.get(session_id)
        if not 0 <= index < len(doc.candidate_hashes):
            raise PreconditionError(
                f"candidate index {index} out of range "
                f"0..{len(doc.candidate_hashes) - 1}"
            )
        data = manager.store.get_blob_bytes(doc.candidate_hashes[index])
        return Response(content=data, media_type="image/png")

    @app.get("/sessions/{session_id}/overlay")
    def get_overlay(session_id: str):
        doc = manager.get(session_id)
        if doc.overlay_hash is None:
            raise IllegalState("no overlay before decomposition")
        data = manager.store.get_blob_bytes(doc.overlay_hash)
        return Response(content=data, media_type="image/png")

    @app.get("/sessions/{session_id}/events")
    def get_events(
        session_id: str,
        request: Request,
        after: int = 0,
        wait: bool = True,
        timeout_s: float | None = None,
    ):
        manager.get(session_id)  # 404 on unknown sessions
        last_event_id = request.headers.get("last-event-id")
        if last_event_id is not None:
            try:
                after = max(after, int(last_event_id))
            except ValueError:
                pass

        if not wait:
            body = "".join(_sse_line(m) for m in bus.history(session_id, after))
            return Response(content=body, media_type="text/event-stream")

        stop = threading.Event()
        if timeout_s is not None:
            # close the stream server-side; clients resume via Last-Event-ID
            timer = threading.Timer(timeout_s, stop.set)
            timer.daemon = True
            timer.start()

        def generate():
            try:
                for message in bus.stream(session_id, after, stop=stop):
                    yield _sse_line(message)
            finally:
                stop.set()

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app
