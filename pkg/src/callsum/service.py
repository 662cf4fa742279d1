"""HTTP JSON API over the summarization pipeline.

Endpoints:
    POST /transcripts                ingest a canonical transcript
    POST /sessions                   run the pipeline on a transcript
    GET  /sessions/{id}              full session (statuses, perplexities)
    POST /sessions/{id}/events       record an edit event (optimistic version)
    POST /sessions/{id}/finalize     freeze the session
    GET  /sessions/{id}/export       export (json or markdown)

Errors are JSON {code, stage, message}. Per-session writes go through
the store's version check; clients retry on 409.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from fastapi import Body, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import pipeline
from .acceptability import LanguageModelScorer
from .errors import (
    CallsumError,
    SessionFinalized,
    StageError,
    UnknownHighlight,
    VersionConflict,
)
from .pipeline import EditEvent, PipelineConfig, SessionStore
from .summarizer import SummarizerBackend
from .transcript import Transcript, parse_transcript


def _error(status: int, code: str, message: str, stage: Optional[str] = None):
    return HTTPException(
        status_code=status,
        detail={"code": code, "stage": stage, "message": message},
    )


def create_app(
    cfg: PipelineConfig,
    model: SummarizerBackend,
    lm: LanguageModelScorer,
) -> FastAPI:
    app = FastAPI(title="callsum", version="0.1.0")
    store = SessionStore(cfg.storage_dir)
    transcripts_dir = Path(cfg.storage_dir) / "transcripts"
    transcripts_dir.mkdir(parents=True, exist_ok=True)

    def check_auth(token: Optional[str]) -> None:
        if cfg.api_token and token != cfg.api_token:
            raise _error(401, "unauthorized", "missing or invalid API token")

    def load_session(session_id: str) -> pipeline.SummarySession:
        try:
            return store.load(session_id)
        except KeyError:
            raise _error(404, "not_found", f"no session {session_id!r}")

    @app.exception_handler(HTTPException)
    async def http_error(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "stage": None, "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.post("/transcripts")
    def ingest_transcript(
        payload: dict[str, Any] = Body(...),
        x_api_token: Optional[str] = Header(default=None),
    ):
        check_auth(x_api_token)
        try:
            t = parse_transcript(json.dumps(payload), "json_turns")
        except CallsumError as exc:
            raise _error(400, "malformed_transcript", str(exc), "INGEST")
        (transcripts_dir / f"{t.id}.json").write_text(
            t.to_json(), encoding="utf-8"
        )
        return {"transcript_id": t.id, "turns": len(t.turns)}

    def _load_transcript(transcript_id: str) -> Transcript:
        path = transcripts_dir / f"{transcript_id}.json"
        if not path.exists():
            raise _error(404, "not_found", f"no transcript {transcript_id!r}")
        return parse_transcript(path.read_text(encoding="utf-8"), "json_turns")

    @app.post("/sessions")
    def run_pipeline(
        payload: dict[str, Any] = Body(...),
        x_api_token: Optional[str] = Header(default=None),
    ):
        check_auth(x_api_token)
        transcript_id = payload.get("transcript_id")
        if not transcript_id:
            raise _error(400, "bad_request", "transcript_id is required")
        t = _load_transcript(transcript_id)
        try:
            session = pipeline.summarize_call(t, cfg, model, lm)
        except StageError as exc:
            raise _error(500, "pipeline_failure", str(exc.cause), exc.stage)
        store.save(session)
        return session.to_dict()

    @app.get("/sessions/{session_id}")
    def get_session(
        session_id: str,
        include_hidden: bool = Query(default=False),
        x_api_token: Optional[str] = Header(default=None),
    ):
        check_auth(x_api_token)
        session = load_session(session_id)
        doc = session.to_dict()
        if not include_hidden:
            doc["highlights"] = [
                h for h in doc["highlights"] if h["visible"]
            ]
        return doc

    @app.post("/sessions/{session_id}/events")
    def post_event(
        session_id: str,
        payload: dict[str, Any] = Body(...),
        x_api_token: Optional[str] = Header(default=None),
    ):
        check_auth(x_api_token)
        if "version" not in payload:
            raise _error(400, "bad_request", "version is required")
        try:
            event = EditEvent(
                highlight_id=payload.get("highlight_id", ""),
                action=payload.get("action", ""),
                new_text=payload.get("new_text"),
                actor=payload.get("actor", "user"),
            )
        except ValueError as exc:
            raise _error(400, "bad_event", str(exc))
        load_session(session_id)  # 404 before version semantics
        try:
            session = store.update(session_id, int(payload["version"]), event)
        except VersionConflict as exc:
            raise _error(409, "version_conflict", str(exc))
        except SessionFinalized as exc:
            raise _error(409, "session_finalized", str(exc))
        except UnknownHighlight as exc:
            raise _error(404, "unknown_highlight", str(exc))
        return {"session_id": session_id, "version": session.version}

    @app.post("/sessions/{session_id}/finalize")
    def finalize(
        session_id: str,
        x_api_token: Optional[str] = Header(default=None),
    ):
        check_auth(x_api_token)
        session = load_session(session_id)
        pipeline.finalize_and_export(session, "json")
        store.save(session)
        return {"session_id": session_id, "state": session.state,
                "version": session.version}

    @app.get("/sessions/{session_id}/export")
    def export(
        session_id: str,
        format: str = Query(default="json"),
        x_api_token: Optional[str] = Header(default=None),
    ):
        check_auth(x_api_token)
        session = load_session(session_id)
        if session.state != pipeline.STATE_FINALIZED:
            raise _error(
                409, "not_finalized", "finalize the session before export"
            )
        try:
            doc = pipeline.finalize_and_export(session, format)
        except ValueError as exc:
            raise _error(400, "bad_format", str(exc))
        if format.lower() == "markdown":
            return PlainTextResponse(doc, media_type="text/markdown")
        return JSONResponse(content=json.loads(doc))

    return app
