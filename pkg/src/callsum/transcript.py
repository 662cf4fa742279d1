"""Canonical data model for calls, turns, segments, and highlights.

Transcripts are parsed from either canonical JSON or a simple two-column
text export ("Label: utterance" per line). All types are immutable value
objects after construction and safe to share across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional

from .errors import (
    EmptyTranscript,
    MalformedInput,
    SeparatorCollision,
    UnknownSpeakerLabel,
)

AGENT_INDEX = 0
CUSTOMER_INDEX = 1

DEFAULT_SPEAKER_ALIASES = {
    "agent": AGENT_INDEX,
    "rep": AGENT_INDEX,
    "seller": AGENT_INDEX,
    "sales": AGENT_INDEX,
    "salesperson": AGENT_INDEX,
    "representative": AGENT_INDEX,
    "support": AGENT_INDEX,
    "customer": CUSTOMER_INDEX,
    "client": CUSTOMER_INDEX,
    "buyer": CUSTOMER_INDEX,
    "prospect": CUSTOMER_INDEX,
    "caller": CUSTOMER_INDEX,
    "user": CUSTOMER_INDEX,
}


@dataclass(frozen=True)
class SpeakerRole:
    """A call participant. 0 = agent, 1 = customer, >= 2 = other parties."""

    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"speaker index must be >= 0, got {self.index}")

    @property
    def is_agent(self) -> bool:
        return self.index == AGENT_INDEX

    @property
    def is_customer(self) -> bool:
        return self.index == CUSTOMER_INDEX

    @property
    def label(self) -> str:
        if self.index == AGENT_INDEX:
            return "agent"
        if self.index == CUSTOMER_INDEX:
            return "customer"
        return f"speaker_{self.index}"

    @classmethod
    def from_label(
        cls,
        label: str,
        aliases: Optional[dict[str, int]] = None,
        strict: bool = False,
        other_registry: Optional[dict[str, int]] = None,
    ) -> "SpeakerRole":
        """Normalize a raw speaker label to a role.

        Unknown labels map to dense OTHER indices (starting at 2) in lenient
        mode; `other_registry` keeps that assignment stable across calls.
        """
        key = label.strip().lower()
        table = aliases if aliases is not None else DEFAULT_SPEAKER_ALIASES
        if key in table:
            return cls(table[key])
        if key == "agent":
            return cls(AGENT_INDEX)
        if key == "customer":
            return cls(CUSTOMER_INDEX)
        if strict:
            raise UnknownSpeakerLabel(f"unmappable speaker label: {label!r}")
        if other_registry is None:
            return cls(2)
        if key not in other_registry:
            other_registry[key] = 2 + len(other_registry)
        return cls(other_registry[key])


AGENT = SpeakerRole(AGENT_INDEX)
CUSTOMER = SpeakerRole(CUSTOMER_INDEX)


def _normalize_text(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


@dataclass(frozen=True)
class Turn:
    """One utterance. `index` is 0-based and chronological."""

    index: int
    speaker: SpeakerRole
    text: str
    start_time: Optional[float] = None
    end_time: Optional[float] = None

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"turn index must be >= 0, got {self.index}")
        if not _normalize_text(self.text):
            raise ValueError(f"turn {self.index} has empty text")


@dataclass(frozen=True)
class Transcript:
    id: str
    turns: tuple[Turn, ...]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.turns:
            raise EmptyTranscript(f"transcript {self.id!r} has no turns")
        for i, turn in enumerate(self.turns):
            if turn.index != i:
                raise ValueError(
                    f"turn indices must be 0..n-1 without gaps; "
                    f"position {i} carries index {turn.index}"
                )

    def __len__(self) -> int:
        return len(self.turns)

    def to_dict(self) -> dict[str, Any]:
        turns = []
        for t in self.turns:
            record: dict[str, Any] = {"speaker": t.speaker.label, "text": t.text}
            if t.start_time is not None:
                record["start"] = t.start_time
            if t.end_time is not None:
                record["end"] = t.end_time
            turns.append(record)
        return {"id": self.id, "turns": turns, "metadata": dict(self.metadata)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


@dataclass(frozen=True)
class Segment:
    """Inclusive span of turns [first_turn, last_turn] within one transcript."""

    transcript_id: str
    first_turn: int
    last_turn: int
    index: int

    def __post_init__(self):
        if not (0 <= self.first_turn <= self.last_turn):
            raise ValueError(
                f"invalid span [{self.first_turn}, {self.last_turn}]"
            )

    @property
    def turn_span(self) -> tuple[int, int]:
        return (self.first_turn, self.last_turn)

    def turns_of(self, t: Transcript) -> tuple[Turn, ...]:
        return t.turns[self.first_turn : self.last_turn + 1]


class HighlightStatus(Enum):
    ACCEPT = "accept"
    REVIEW = "review"
    REJECT = "reject"

    @property
    def rank(self) -> int:
        return {"accept": 0, "review": 1, "reject": 2}[self.value]


class HighlightOrigin(Enum):
    MODEL = "model"
    USER_EDITED = "user_edited"


@dataclass(frozen=True)
class Highlight:
    segment_index: int
    text: str
    perplexity: float
    status: HighlightStatus
    origin: HighlightOrigin = HighlightOrigin.MODEL

    def __post_init__(self):
        if self.perplexity < 1.0:
            raise ValueError(f"perplexity must be >= 1, got {self.perplexity}")


def validate_partition(segments: Iterable[Segment], num_turns: int) -> None:
    """Raise ValueError unless segments are an ordered, covering partition."""
    segs = list(segments)
    if not segs:
        raise ValueError("empty segment list cannot partition a transcript")
    expected_start = 0
    for ordinal, seg in enumerate(segs):
        if seg.index != ordinal:
            raise ValueError(f"segment ordinals out of order at {ordinal}")
        if seg.first_turn != expected_start:
            raise ValueError(
                f"segment {ordinal} starts at {seg.first_turn}, "
                f"expected {expected_start}"
            )
        expected_start = seg.last_turn + 1
    if expected_start != num_turns:
        raise ValueError(
            f"segments cover turns [0, {expected_start}), transcript has {num_turns}"
        )


def parse_transcript(
    raw: bytes | str,
    format: str = "json_turns",
    transcript_id: Optional[str] = None,
    aliases: Optional[dict[str, int]] = None,
    strict_speakers: bool = False,
) -> Transcript:
    """Parse a raw transcript in one of the supported formats.

    `format` is "json_turns" (canonical JSON schema) or "two_column_text"
    (lines of "Label: utterance", blank lines ignored).
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"transcript is not valid UTF-8: {exc}") from exc

    fmt = format.lower()
    if fmt == "json_turns":
        return _parse_json_turns(raw, transcript_id, aliases, strict_speakers)
    if fmt == "two_column_text":
        return _parse_two_column(raw, transcript_id, aliases, strict_speakers)
    raise MalformedInput(f"unknown transcript format: {format!r}")


def _parse_json_turns(raw, transcript_id, aliases, strict):
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc}") from exc

    if isinstance(doc, list):
        doc = {"id": transcript_id or "transcript", "turns": doc, "metadata": {}}
    if not isinstance(doc, dict) or "turns" not in doc:
        raise MalformedInput("expected an object with a 'turns' list")
    raw_turns = doc["turns"]
    if not isinstance(raw_turns, list):
        raise MalformedInput("'turns' must be a list")
    if not raw_turns:
        raise EmptyTranscript("transcript has zero turns")

    registry: dict[str, int] = {}
    turns = []
    for i, rec in enumerate(raw_turns):
        if not isinstance(rec, dict) or "speaker" not in rec or "text" not in rec:
            raise MalformedInput(f"turn {i} missing 'speaker' or 'text'")
        text = _normalize_text(str(rec["text"]))
        if not text:
            raise MalformedInput(f"turn {i} has empty text")
        role = SpeakerRole.from_label(
            str(rec["speaker"]), aliases, strict, other_registry=registry
        )
        turns.append(
            Turn(
                index=i,
                speaker=role,
                text=text,
                start_time=rec.get("start"),
                end_time=rec.get("end"),
            )
        )
    return Transcript(
        id=transcript_id or str(doc.get("id", "transcript")),
        turns=tuple(turns),
        metadata=dict(doc.get("metadata", {})),
    )


def _parse_two_column(raw, transcript_id, aliases, strict):
    registry: dict[str, int] = {}
    turns = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        label, sep, utterance = line.partition(":")
        if not sep:
            raise MalformedInput(f"line {lineno} is not 'Label: utterance'")
        text = _normalize_text(utterance)
        if not text:
            raise MalformedInput(f"line {lineno} has an empty utterance")
        role = SpeakerRole.from_label(label, aliases, strict, other_registry=registry)
        turns.append(Turn(index=len(turns), speaker=role, text=text))
    if not turns:
        raise EmptyTranscript("transcript has zero turns")
    return Transcript(id=transcript_id or "transcript", turns=tuple(turns))


def render_dialogue_text(t: Transcript, sep: str) -> str:
    """Flatten a transcript into "turn0 sep turn1 sep ... turn(n-1)"."""
    if not sep:
        raise ValueError("separator must be non-empty")
    for turn in t.turns:
        if sep in turn.text:
            raise SeparatorCollision(
                f"separator {sep!r} occurs inside turn {turn.index}"
            )
    return f" {sep} ".join(turn.text for turn in t.turns)
