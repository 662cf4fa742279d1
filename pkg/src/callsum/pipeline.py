"""Pipeline orchestration: segmentation -> per-segment summarization ->
acceptability routing, persisted as event-sourced summary sessions.

A session stores the generated snapshot plus an append-only edit log;
replaying the log over the snapshot reproduces the current state.
Sessions persist as one JSON document each, written atomically.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import os
import tempfile
import uuid
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import acceptability, segmentation, summarizer
from .errors import (
    SessionFinalized,
    StageError,
    UnknownHighlight,
    VersionConflict,
)
from .metrics import SumSimWeights
from .transcript import (
    HighlightStatus,
    Transcript,
    Turn,
    render_dialogue_text,
    validate_partition,
)

STATE_GENERATED = "generated"
STATE_IN_REVIEW = "in_review"
STATE_FINALIZED = "finalized"

ACTION_ACCEPT = "accept"
ACTION_EDIT = "edit"
ACTION_DISCARD = "discard"
ACTION_RESTORE = "restore"
_ACTIONS = {ACTION_ACCEPT, ACTION_EDIT, ACTION_DISCARD, ACTION_RESTORE}


def _utcnow() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


@dataclass
class SessionHighlight:
    """Mutable per-session view of a generated highlight."""

    highlight_id: str
    segment_index: int
    perspective: str
    text: str
    original_text: str
    perplexity: float
    status: str
    origin: str = "model"
    visible: bool = True
    user_accepted: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "highlight_id": self.highlight_id,
            "segment_index": self.segment_index,
            "perspective": self.perspective,
            "text": self.text,
            "original_text": self.original_text,
            # null stands for infinite perplexity (strict JSON has no inf)
            "perplexity": self.perplexity if math.isfinite(self.perplexity) else None,
            "status": self.status,
            "origin": self.origin,
            "visible": self.visible,
            "user_accepted": self.user_accepted,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SessionHighlight":
        d = dict(d)
        if d.get("perplexity") is None:
            d["perplexity"] = float("inf")
        return cls(**d)


@dataclass(frozen=True)
class EditEvent:
    highlight_id: str
    action: str
    new_text: Optional[str] = None
    actor: str = "user"
    timestamp: str = field(default_factory=_utcnow)

    def __post_init__(self):
        if self.action not in _ACTIONS:
            raise ValueError(f"unknown edit action {self.action!r}")
        if self.action == ACTION_EDIT and not (self.new_text or "").strip():
            raise ValueError("EDIT events require non-empty new_text")

    def to_dict(self) -> dict[str, Any]:
        return {
            "highlight_id": self.highlight_id,
            "action": self.action,
            "new_text": self.new_text,
            "actor": self.actor,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EditEvent":
        return cls(
            highlight_id=d["highlight_id"],
            action=d["action"],
            new_text=d.get("new_text"),
            actor=d.get("actor", "user"),
            timestamp=d.get("timestamp", _utcnow()),
        )


@dataclass
class SummarySession:
    session_id: str
    transcript_id: str
    transcript: dict[str, Any]
    segments: list[dict[str, Any]]
    highlights: list[SessionHighlight]
    generated_snapshot: list[dict[str, Any]]
    edit_log: list[EditEvent] = field(default_factory=list)
    state: str = STATE_GENERATED
    version: int = 1
    created_at: str = field(default_factory=_utcnow)

    def find_highlight(self, highlight_id: str) -> SessionHighlight:
        for h in self.highlights:
            if h.highlight_id == highlight_id:
                return h
        raise UnknownHighlight(f"no highlight {highlight_id!r} in session")

    def visible_highlights(self, include_hidden: bool = False):
        return [h for h in self.highlights if include_hidden or h.visible]

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "transcript_id": self.transcript_id,
            "transcript": self.transcript,
            "segments": self.segments,
            "highlights": [h.to_dict() for h in self.highlights],
            "generated_snapshot": self.generated_snapshot,
            "edit_log": [e.to_dict() for e in self.edit_log],
            "state": self.state,
            "version": self.version,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SummarySession":
        return cls(
            session_id=d["session_id"],
            transcript_id=d["transcript_id"],
            transcript=d["transcript"],
            segments=d["segments"],
            highlights=[SessionHighlight.from_dict(h) for h in d["highlights"]],
            generated_snapshot=d["generated_snapshot"],
            edit_log=[EditEvent.from_dict(e) for e in d["edit_log"]],
            state=d["state"],
            version=d["version"],
            created_at=d["created_at"],
        )


@dataclass
class PipelineConfig:
    """Everything the pipeline needs to run a call end to end."""

    segmenter: segmentation.SegmenterConfig = field(
        default_factory=segmentation.SegmenterConfig
    )
    generation: summarizer.GenerationParams = field(
        default_factory=summarizer.GenerationParams
    )
    thresholds: acceptability.AcceptabilityThresholds = field(
        default_factory=lambda: acceptability.AcceptabilityThresholds(50.0, 200.0)
    )
    weights: SumSimWeights = field(default_factory=SumSimWeights)
    perspectives: tuple[str, ...] = ("",)
    sep_token: str = "<sep>"
    storage_dir: str = "sessions"
    model_checkpoint: Optional[str] = None
    api_token: Optional[str] = None


def _apply_event(session_highlights: list[SessionHighlight], event: EditEvent):
    for h in session_highlights:
        if h.highlight_id == event.highlight_id:
            break
    else:
        raise UnknownHighlight(f"no highlight {event.highlight_id!r}")
    if event.action == ACTION_EDIT:
        h.text = event.new_text.strip()
        h.origin = "user_edited"
    elif event.action == ACTION_DISCARD:
        h.visible = False
    elif event.action == ACTION_RESTORE:
        h.visible = True
    elif event.action == ACTION_ACCEPT:
        h.user_accepted = True


def replay_edits(
    snapshot: Sequence[dict[str, Any]], edit_log: Sequence[EditEvent]
) -> list[SessionHighlight]:
    """Rebuild current highlight state from the generated snapshot."""
    highlights = [SessionHighlight.from_dict(dict(h)) for h in snapshot]
    for event in edit_log:
        _apply_event(highlights, event)
    return highlights


def _normalized(text: str) -> str:
    return " ".join(text.lower().split())


def summarize_call(
    t: Transcript,
    cfg: PipelineConfig,
    model: summarizer.SummarizerBackend,
    lm: acceptability.LanguageModelScorer,
    embedder: Optional[segmentation.WordEmbedder] = None,
) -> SummarySession:
    """Run the full pipeline on one transcript.

    Failures carry the pipeline stage (SEGMENTATION / GENERATION /
    VALIDATION) for attribution. REJECT highlights are retained but
    hidden by default.
    """
    if embedder is None:
        embedder = segmentation.HashEmbedder(cfg.segmenter.embedding_dim)

    try:
        segments = segmentation.segment_transcript(t, embedder, cfg.segmenter)
        validate_partition(segments, len(t.turns))
    except Exception as exc:
        raise StageError("SEGMENTATION", exc) from exc

    highlights: list[SessionHighlight] = []
    for seg in segments:
        seen: set[str] = set()
        seg_transcript = Transcript(
            id=t.id,
            turns=tuple(
                Turn(index=i, speaker=turn.speaker, text=turn.text)
                for i, turn in enumerate(seg.turns_of(t))
            ),
        )
        seg_text = render_dialogue_text(seg_transcript, cfg.sep_token)
        for pi, perspective in enumerate(cfg.perspectives):
            prompt_text = seg_text
            if perspective:
                prompt_text = f"{seg_text} {cfg.sep_token} {perspective}"
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    text = summarizer.generate_highlight(
                        prompt_text, model, cfg.generation
                    )
            except Exception as exc:
                raise StageError("GENERATION", exc) from exc

            if _normalized(text) in seen:
                continue  # duplicate candidate for this segment
            seen.add(_normalized(text))

            try:
                if len(lm.encode(text)) < 2:
                    pp = float("inf")
                else:
                    pp = acceptability.perplexity(text, lm)
                status = acceptability.classify_highlight(pp, cfg.thresholds)
            except Exception as exc:
                raise StageError("VALIDATION", exc) from exc

            highlights.append(
                SessionHighlight(
                    highlight_id=f"h{seg.index}-{pi}",
                    segment_index=seg.index,
                    perspective=perspective,
                    text=text,
                    original_text=text,
                    perplexity=pp,
                    status=status.value,
                    visible=status != HighlightStatus.REJECT,
                )
            )

    snapshot = [h.to_dict() for h in highlights]
    return SummarySession(
        session_id=uuid.uuid4().hex,
        transcript_id=t.id,
        transcript=t.to_dict(),
        segments=[
            {
                "index": s.index,
                "first_turn": s.first_turn,
                "last_turn": s.last_turn,
            }
            for s in segments
        ],
        highlights=highlights,
        generated_snapshot=snapshot,
    )


def record_edit(session: SummarySession, event: EditEvent) -> SummarySession:
    """Append an edit event and apply it to the session in place."""
    if session.state == STATE_FINALIZED:
        raise SessionFinalized(f"session {session.session_id} is finalized")
    session.find_highlight(event.highlight_id)  # raises UnknownHighlight
    _apply_event(session.highlights, event)
    session.edit_log.append(event)
    session.state = STATE_IN_REVIEW
    session.version += 1
    return session


def finalize_and_export(session: SummarySession, format: str = "json") -> str:
    """Move the session to FINALIZED and export visible highlights."""
    if session.state not in (STATE_GENERATED, STATE_IN_REVIEW, STATE_FINALIZED):
        raise ValueError(f"unknown session state {session.state!r}")
    if session.state != STATE_FINALIZED:
        session.state = STATE_FINALIZED
        session.version += 1
    visible = sorted(
        session.visible_highlights(), key=lambda h: h.segment_index
    )
    if not visible:
        warnings.warn("exporting a session with no visible highlights")
    if format.lower() == "json":
        return json.dumps(
            {
                "session_id": session.session_id,
                "transcript_id": session.transcript_id,
                "highlights": [
                    {
                        "segment_index": h.segment_index,
                        "text": h.text,
                        "origin": h.origin,
                    }
                    for h in visible
                ],
            },
            ensure_ascii=False,
            indent=2,
        )
    if format.lower() == "markdown":
        lines = [f"# Call summary: {session.transcript_id}", ""]
        lines += [f"- {h.text}" for h in visible]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown export format {format!r}")


class SessionStore:
    """One JSON document per session, written via atomic rename."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.json"

    def save(self, session: SummarySession) -> None:
        payload = json.dumps(session.to_dict(), ensure_ascii=False)
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, self._path(session.session_id))
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    def load(self, session_id: str) -> SummarySession:
        path = self._path(session_id)
        if not path.exists():
            raise KeyError(f"no session {session_id!r}")
        return SummarySession.from_dict(
            json.loads(path.read_text(encoding="utf-8"))
        )

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))

    def update(
        self, session_id: str, expected_version: int, event: EditEvent
    ) -> SummarySession:
        """Optimistic-concurrency edit: fails on version mismatch."""
        session = self.load(session_id)
        if session.version != expected_version:
            raise VersionConflict(
                f"session at version {session.version}, caller expected "
                f"{expected_version}"
            )
        record_edit(session, event)
        self.save(session)
        return session
