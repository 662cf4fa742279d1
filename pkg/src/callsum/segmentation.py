"""Embedding-based transcript segmentation.

A transcript is split at turn boundaries into semantically coherent
segments. Each turn is represented by the unit-normalized mean of its
word vectors; a partition is scored by the sum of segment-vector norms
minus a linear penalty per split, and the best partition is found with
an exact dynamic program over turn boundaries.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .errors import InvalidBoundary, OversizedTurn
from .transcript import Segment, Transcript, Turn

_TIE_EPS = 1e-9


class WordEmbedder(Protocol):
    """Maps a token to a fixed-dimension vector, deterministically per token."""

    embedding_dim: int

    def embed(self, token: str) -> np.ndarray: ...


class HashEmbedder:
    """Deterministic pseudo-embedder for offline use and tests.

    Vectors are derived from a salted SHA-256 of the token, so the same
    token always maps to the same unit vector within and across runs.
    """

    def __init__(self, embedding_dim: int = 32, salt: str = ""):
        self.embedding_dim = embedding_dim
        self.salt = salt

    def embed(self, token: str) -> np.ndarray:
        digest = hashlib.sha256((self.salt + token).encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec = rng.standard_normal(self.embedding_dim)
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


class VectorFileEmbedder:
    """Pretrained vectors from the standard text format.

    Each line is "token v1 v2 ... vd"; an optional first line "count dim"
    header is skipped. Out-of-vocabulary tokens embed to the zero vector.
    """

    def __init__(self, path: str):
        self.vectors: dict[str, np.ndarray] = {}
        self.embedding_dim = 0
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            parts = first.rstrip("\n").split(" ")
            if len(parts) == 2 and all(p.isdigit() for p in parts):
                self.embedding_dim = int(parts[1])
            elif len(parts) > 2:
                self._add_line(parts)
            for line in fh:
                parts = line.rstrip("\n").split(" ")
                if len(parts) > 2:
                    self._add_line(parts)
        if not self.vectors:
            raise ValueError(f"no vectors loaded from {path}")

    def _add_line(self, parts: list[str]) -> None:
        vec = np.asarray([float(x) for x in parts[1:]], dtype=float)
        if self.embedding_dim == 0:
            self.embedding_dim = vec.shape[0]
        elif vec.shape[0] != self.embedding_dim:
            raise ValueError(
                f"inconsistent vector dimension for token {parts[0]!r}"
            )
        self.vectors[parts[0]] = vec

    def embed(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is None:
            return np.zeros(self.embedding_dim)
        return vec


@dataclass(frozen=True)
class SegmenterConfig:
    max_segment_tokens: int = 512
    min_segment_turns: int = 2
    embedding_dim: int = 32
    split_penalty: float = 0.0
    strict: bool = False
    # Token counting defaults to whitespace; the pipeline passes the
    # summarizer's tokenizer so the cap matches the model window.
    token_counter: Optional[Callable[[str], int]] = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.max_segment_tokens <= 0:
            raise ValueError("max_segment_tokens must be > 0")
        if self.min_segment_turns < 1:
            raise ValueError("min_segment_turns must be >= 1")
        if self.split_penalty < 0:
            raise ValueError("split_penalty must be >= 0")

    def count_tokens(self, text: str) -> int:
        if self.token_counter is not None:
            return self.token_counter(text)
        return len(text.split())


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def turn_vector(turn: Turn, embedder: WordEmbedder) -> np.ndarray:
    """Unit-norm mean of the turn's word vectors.

    Returns the zero vector (unnormalized) only when every token is
    out-of-vocabulary.
    """
    tokens = tokenize(turn.text)
    if not tokens:
        raise ValueError(f"turn {turn.index} has no tokens")
    mean = np.mean([embedder.embed(tok) for tok in tokens], axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        return mean
    return mean / norm


def segmentation_objective(
    turn_vectors: Sequence[np.ndarray],
    boundaries: Sequence[int],
    split_penalty: float = 0.0,
) -> float:
    """Score a partition; higher is better.

    `boundaries` are indices i meaning "a new segment starts at turn i"
    (0 < i < n), sorted ascending. The score is the sum over segments of
    the L2 norm of the segment's summed turn vectors, minus
    split_penalty per split.
    """
    n = len(turn_vectors)
    bounds = list(boundaries)
    if bounds != sorted(set(bounds)) or any(b <= 0 or b >= n for b in bounds):
        raise InvalidBoundary(f"invalid boundary set {bounds} for {n} turns")
    cuts = [0] + bounds + [n]
    vecs = np.asarray(turn_vectors, dtype=float)
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        total += float(np.linalg.norm(vecs[lo:hi].sum(axis=0)))
    return total - split_penalty * len(bounds)


def _segment_norms(turn_vectors: np.ndarray) -> np.ndarray:
    """norms[i, j] = ||sum of turn vectors i..j-1|| for all 0 <= i < j <= n."""
    n = turn_vectors.shape[0]
    prefix = np.vstack([np.zeros(turn_vectors.shape[1]), np.cumsum(turn_vectors, axis=0)])
    norms = np.zeros((n + 1, n + 1))
    for i in range(n):
        diffs = prefix[i + 1 :] - prefix[i]
        norms[i, i + 1 :] = np.linalg.norm(diffs, axis=1)
    return norms


def _solve(
    norms: np.ndarray,
    feasible: Callable[[int, int], bool],
    penalty: float,
    n: int,
) -> Optional[tuple[float, tuple[int, ...]]]:
    """Exact DP over prefixes.

    best[j] = (score, num_segments, boundaries) for turns [0, j). Ties go
    to fewer segments, then lexicographically earlier boundaries.
    """
    best: list[Optional[tuple[float, int, tuple[int, ...]]]] = [None] * (n + 1)
    best[0] = (0.0, 0, ())
    for j in range(1, n + 1):
        for i in range(j):
            if best[i] is None or not feasible(i, j):
                continue
            prev_score, prev_k, prev_bounds = best[i]
            score = prev_score + norms[i, j] - (penalty if i > 0 else 0.0)
            k = prev_k + 1
            bounds = prev_bounds + ((i,) if i > 0 else ())
            cand = (score, k, bounds)
            cur = best[j]
            if cur is None or _better(cand, cur):
                best[j] = cand
    if best[n] is None:
        return None
    score, _, bounds = best[n]
    return score, bounds


def _better(a: tuple[float, int, tuple], b: tuple[float, int, tuple]) -> bool:
    if a[0] > b[0] + _TIE_EPS:
        return True
    if a[0] < b[0] - _TIE_EPS:
        return False
    if a[1] != b[1]:
        return a[1] < b[1]
    return a[2] < b[2]


def segment_transcript(
    t: Transcript,
    embedder: WordEmbedder,
    cfg: SegmenterConfig,
) -> list[Segment]:
    """Partition a transcript into segments maximizing the objective.

    Hard constraint: a segment may not exceed max_segment_tokens unless it
    is a single oversized turn (warned, or an error in strict mode). The
    min-turn constraint is enforced when some partition satisfies it and
    relaxed otherwise.
    """
    n = len(t.turns)
    token_counts = [cfg.count_tokens(turn.text) for turn in t.turns]
    for turn, count in zip(t.turns, token_counts):
        if count > cfg.max_segment_tokens:
            msg = (
                f"turn {turn.index} alone has {count} tokens, over the "
                f"{cfg.max_segment_tokens}-token segment cap"
            )
            if cfg.strict:
                raise OversizedTurn(msg)
            warnings.warn(msg, stacklevel=2)

    vecs = np.asarray([turn_vector(turn, embedder) for turn in t.turns])
    norms = _segment_norms(vecs)
    prefix_tokens = [0]
    for c in token_counts:
        prefix_tokens.append(prefix_tokens[-1] + c)

    def fits(i: int, j: int) -> bool:
        if j - i == 1:
            return True  # oversized single turns become their own segment
        return prefix_tokens[j] - prefix_tokens[i] <= cfg.max_segment_tokens

    def fits_min_turns(i: int, j: int) -> bool:
        return fits(i, j) and j - i >= cfg.min_segment_turns

    solution = _solve(norms, fits_min_turns, cfg.split_penalty, n)
    if solution is None:
        solution = _solve(norms, fits, cfg.split_penalty, n)
    if solution is None:
        raise OversizedTurn("no feasible segmentation exists")

    _, bounds = solution
    cuts = [0, *bounds, n]
    return [
        Segment(transcript_id=t.id, first_turn=lo, last_turn=hi - 1, index=k)
        for k, (lo, hi) in enumerate(zip(cuts, cuts[1:]))
    ]
