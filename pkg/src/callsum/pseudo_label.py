"""Offline pseudo-label generation via a pluggable completion backend.

Each segment is turned into a question-answering prompt; the backend's
answers become summary labels that are mixed with human-labeled pairs
for fine-tuning. Backends: a deterministic stub for tests, a recorded
replay client for offline reproducibility, and a live HTTP client.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Protocol, Sequence

import httpx

from .errors import BackendUnavailable

DEFAULT_LAYOUT = "{segment}\n\nQ: {question}\nA:"
DEFAULT_STOP = ["\nQ:", "\n\n"]

DEFAULT_QUESTIONS = [
    "Summarize this part of the call in one sentence.",
    "What issue did the customer report?",
    "What solution did the agent offer?",
]


@dataclass(frozen=True)
class PromptTemplate:
    question: str
    layout: str = DEFAULT_LAYOUT
    stop_sequences: tuple[str, ...] = tuple(DEFAULT_STOP)
    max_answer_tokens: int = 64

    def __post_init__(self):
        for slot in ("{segment}", "{question}"):
            if self.layout.count(slot) != 1:
                raise ValueError(f"layout must contain {slot} exactly once")


class CompletionClient(Protocol):
    def complete(
        self,
        prompt: str,
        max_tokens: int,
        temperature: float,
        stop: Sequence[str],
    ) -> str: ...

    def metadata(self) -> dict[str, Any]: ...


@dataclass(frozen=True)
class PseudoLabeledPair:
    dialogue: str
    summary: str
    question: str
    source: str = "pseudo"
    provenance: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        return {
            "dialogue": self.dialogue,
            "summary": self.summary,
            "source": self.source,
            "question": self.question,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class LabelingPolicy:
    max_retries: int = 3
    retry_backoff_s: float = 0.0
    requests_per_minute: Optional[float] = None
    temperature: float = 0.0
    max_workers: int = 1
    checkpoint_path: Optional[str] = None


def build_prompt(segment_text: str, tpl: PromptTemplate) -> str:
    if not segment_text.strip():
        raise ValueError("segment text must be non-empty")
    if not tpl.question.strip():
        warnings.warn("prompt question is empty", stacklevel=2)
    return tpl.layout.replace("{segment}", segment_text).replace(
        "{question}", tpl.question
    )


class StubCompletionClient:
    """Deterministic offline backend: the answer is a short digest of the
    prompt, or a fixed canned string if one is configured."""

    def __init__(self, canned: Optional[str] = None):
        self.canned = canned
        self.calls = 0

    def complete(self, prompt, max_tokens, temperature, stop):
        self.calls += 1
        if self.canned is not None:
            return self.canned
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:8]
        words = prompt.split()
        head = " ".join(words[: min(6, len(words))])
        return f"{head} [{digest}]"

    def metadata(self):
        return {"backend": "stub", "model": "stub-v1"}


class ReplayCompletionClient:
    """Replays recorded prompt -> completion pairs from a JSONL file."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        self.responses: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    self.responses[rec["prompt"]] = rec["completion"]

    def complete(self, prompt, max_tokens, temperature, stop):
        if prompt not in self.responses:
            raise BackendUnavailable(
                f"no recorded completion for prompt (len {len(prompt)})"
            )
        return self.responses[prompt]

    def metadata(self):
        return {"backend": "replay", "recording": self.path}


class HttpCompletionClient:
    """Minimal client for an OpenAI-style completions endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_token: Optional[str] = None,
        timeout_s: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        headers = {}
        if api_token:
            headers["Authorization"] = f"Bearer {api_token}"
        self._client = httpx.Client(timeout=timeout_s, headers=headers)

    def complete(self, prompt, max_tokens, temperature, stop):
        try:
            resp = self._client.post(
                f"{self.base_url}/completions",
                json={
                    "model": self.model,
                    "prompt": prompt,
                    "max_tokens": max_tokens,
                    "temperature": temperature,
                    "stop": list(stop) or None,
                },
            )
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendUnavailable(str(exc)) from exc
        return resp.json()["choices"][0]["text"]

    def metadata(self):
        return {"backend": "http", "base_url": self.base_url, "model": self.model}


class _TokenBucket:
    """Simple requests-per-minute limiter shared across worker threads."""

    def __init__(self, per_minute: float):
        self.interval = 60.0 / per_minute
        self._lock = threading.Lock()
        self._next_at = time.monotonic()

    def acquire(self) -> None:
        with self._lock:
            now = time.monotonic()
            wait = self._next_at - now
            self._next_at = max(self._next_at, now) + self.interval
        if wait > 0:
            time.sleep(wait)


def _trim_answer(raw: str, stop: Sequence[str]) -> str:
    for seq in stop:
        pos = raw.find(seq)
        if pos != -1:
            raw = raw[:pos]
    return raw.strip()


def _complete_with_retries(client, prompt, tpl, policy, bucket):
    last_error: Optional[Exception] = None
    for attempt in range(policy.max_retries + 1):
        if bucket is not None:
            bucket.acquire()
        try:
            raw = client.complete(
                prompt,
                max_tokens=tpl.max_answer_tokens,
                temperature=policy.temperature,
                stop=tpl.stop_sequences,
            )
            return raw, attempt
        except BackendUnavailable as exc:
            last_error = exc
            if policy.retry_backoff_s:
                time.sleep(policy.retry_backoff_s * (attempt + 1))
    raise BackendUnavailable(
        f"backend failed after {policy.max_retries + 1} attempts: {last_error}"
    )


@dataclass
class LabelingResult:
    pairs: list[PseudoLabeledPair]
    dropped_empty: int
    completed_prompts: int


def label_segments(
    segments: Sequence[str],
    templates: Sequence[PromptTemplate],
    client: CompletionClient,
    policy: LabelingPolicy = LabelingPolicy(),
) -> LabelingResult:
    """Label every (segment, template) combination, segment-major order.

    Empty answers are dropped (counted). On backend failure, completed
    pairs are persisted with a resume cursor when a checkpoint path is
    configured, and the error propagates.
    """
    if not segments or not templates:
        raise ValueError("need at least one segment and one template")

    jobs = [
        (si * len(templates) + ti, seg, tpl)
        for si, seg in enumerate(segments)
        for ti, tpl in enumerate(templates)
    ]
    start_index = 0
    done: list[Optional[PseudoLabeledPair | None]] = [None] * len(jobs)
    dropped = 0
    checkpoint = Path(policy.checkpoint_path) if policy.checkpoint_path else None
    if checkpoint is not None and checkpoint.exists():
        state = json.loads(checkpoint.read_text(encoding="utf-8"))
        start_index = state["cursor"]
        dropped = state["dropped_empty"]
        for rec in state["pairs"]:
            done[rec["job"]] = PseudoLabeledPair(
                dialogue=rec["dialogue"],
                summary=rec["summary"],
                question=rec["question"],
                provenance=rec["provenance"],
            )

    bucket = (
        _TokenBucket(policy.requests_per_minute)
        if policy.requests_per_minute
        else None
    )
    meta = client.metadata()

    def run_one(job):
        index, segment, tpl = job
        prompt = build_prompt(segment, tpl)
        raw, retries = _complete_with_retries(client, prompt, tpl, policy, bucket)
        answer = _trim_answer(raw, tpl.stop_sequences)
        if not answer:
            return index, None
        # No wall-clock fields here: identical inputs must serialize to
        # identical bytes so labeling runs are reproducible.
        provenance = dict(meta)
        provenance["retries"] = retries
        return index, PseudoLabeledPair(
            dialogue=segment,
            summary=answer,
            question=tpl.question,
            provenance=provenance,
        )

    pending = jobs[start_index:]
    try:
        if policy.max_workers > 1:
            with ThreadPoolExecutor(max_workers=policy.max_workers) as pool:
                for index, pair in pool.map(run_one, pending):
                    if pair is None:
                        dropped += 1
                    else:
                        done[index] = pair
        else:
            for job in pending:
                index, pair = run_one(job)
                if pair is None:
                    dropped += 1
                else:
                    done[index] = pair
    except BackendUnavailable:
        if checkpoint is not None:
            _write_checkpoint(checkpoint, done, dropped)
        raise

    pairs = [p for p in done if p is not None]
    if checkpoint is not None and checkpoint.exists():
        checkpoint.unlink()
    return LabelingResult(
        pairs=pairs, dropped_empty=dropped, completed_prompts=len(jobs)
    )


def _write_checkpoint(path: Path, done, dropped: int) -> None:
    records = []
    cursor = 0
    for i, pair in enumerate(done):
        if pair is not None:
            records.append({"job": i, **pair.to_record()})
            cursor = i + 1
    path.write_text(
        json.dumps({"cursor": cursor, "dropped_empty": dropped, "pairs": records}),
        encoding="utf-8",
    )


def mix_datasets(
    human: Sequence[dict[str, Any]],
    pseudo: Sequence[dict[str, Any]],
    shuffle_seed: int = 0,
) -> tuple[list[dict[str, Any]], dict[str, int]]:
    """Concatenate source-tagged pairs and shuffle deterministically."""
    if not human and not pseudo:
        raise ValueError("at least one dataset must be non-empty")
    tagged = [{**rec, "source": rec.get("source", "human")} for rec in human]
    tagged += [{**rec, "source": rec.get("source", "pseudo")} for rec in pseudo]
    random.Random(shuffle_seed).shuffle(tagged)
    counts = {"human": len(human), "pseudo": len(pseudo)}
    return tagged, counts


def write_pairs_jsonl(path: str | Path, pairs: Sequence[PseudoLabeledPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_record(), ensure_ascii=False) + "\n")


def read_pairs_jsonl(path: str | Path) -> list[dict[str, Any]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out
