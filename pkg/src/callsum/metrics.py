"""Composite summary-quality metric (SumSim).

Four dimensions: coverage (ROUGE-L against the reference), relevance
(semantic similarity against the reference), informativeness (business
keyword hit rate), and factuality (consistency with the source text).
They combine as S_0 = alpha * S_i + (1 - alpha)/2 * (S_r + S_b) and
SumSim = beta * S_f + (1 - beta) * S_0.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .errors import ComponentOutOfRange

DEFAULT_ALPHA = 0.3
DEFAULT_BETA = 0.3


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return re.sub(r"[^\w\s]", " ", text.lower()).split()


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_f(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Sentence-level ROUGE-L F1 over pre-tokenized sequences."""
    lcs = _lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2 * precision * recall / (precision + recall)


def keyword_informativeness(
    candidate: str, keywords: Sequence[str]
) -> Optional[float]:
    """Fraction of keywords present as whole-token matches, or None when
    no keywords are configured (composition then renormalizes)."""
    if not keywords:
        return None
    tokens = normalize_tokens(candidate)
    hits = 0
    for keyword in keywords:
        needle = normalize_tokens(keyword)
        if not needle:
            continue
        n = len(needle)
        if any(tokens[i : i + n] == needle for i in range(len(tokens) - n + 1)):
            hits += 1
    return hits / len(keywords)


class RelevanceScorer(Protocol):
    def score(self, candidate: str, reference: str) -> float: ...


class FactualityScorer(Protocol):
    def score(self, candidate: str, source: str) -> float: ...


class TokenCosineRelevance:
    """Lexical fallback for semantic relevance: cosine similarity of
    token count vectors. Deterministic, model-free."""

    def score(self, candidate: str, reference: str) -> float:
        a, b = normalize_tokens(candidate), normalize_tokens(reference)
        if not a or not b:
            return 0.0
        counts_a: dict[str, int] = {}
        counts_b: dict[str, int] = {}
        for t in a:
            counts_a[t] = counts_a.get(t, 0) + 1
        for t in b:
            counts_b[t] = counts_b.get(t, 0) + 1
        dot = sum(counts_a[t] * counts_b.get(t, 0) for t in counts_a)
        norm = math.sqrt(sum(v * v for v in counts_a.values())) * math.sqrt(
            sum(v * v for v in counts_b.values())
        )
        return dot / norm if norm else 0.0


class ContainmentFactuality:
    """Lexical fallback for factual consistency: fraction of candidate
    content tokens that appear in the source (entailment by containment)."""

    def score(self, candidate: str, source: str) -> float:
        cand = normalize_tokens(candidate)
        if not cand:
            return 0.0
        src = set(normalize_tokens(source))
        return sum(1 for t in cand if t in src) / len(cand)


class EmbeddingRelevance:
    """Sentence-embedding cosine relevance. Requires sentence-transformers
    and a downloaded model; tests use the lexical fallback instead."""

    def __init__(self, model_name: str = "all-MiniLM-L6-v2"):
        from sentence_transformers import SentenceTransformer  # lazy, heavy

        self._model = SentenceTransformer(model_name)

    def score(self, candidate: str, reference: str) -> float:
        import numpy as np

        vecs = self._model.encode([candidate, reference])
        sim = float(
            np.dot(vecs[0], vecs[1])
            / (np.linalg.norm(vecs[0]) * np.linalg.norm(vecs[1]) + 1e-12)
        )
        return min(1.0, max(0.0, (sim + 1.0) / 2.0))


class NliFactuality:
    """Entailment-probability factuality via an NLI cross-encoder."""

    def __init__(self, model_name: str = "cross-encoder/nli-deberta-v3-small"):
        from sentence_transformers import CrossEncoder  # lazy, heavy

        self._model = CrossEncoder(model_name)

    def score(self, candidate: str, source: str) -> float:
        import numpy as np

        logits = self._model.predict([(source, candidate)])[0]
        exp = np.exp(logits - np.max(logits))
        probs = exp / exp.sum()
        # label order for these checkpoints: contradiction, entailment, neutral
        return float(probs[1])


@dataclass(frozen=True)
class SumSimWeights:
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")


@dataclass(frozen=True)
class ScorerBundle:
    relevance: RelevanceScorer = field(default_factory=TokenCosineRelevance)
    factuality: Optional[FactualityScorer] = field(
        default_factory=ContainmentFactuality
    )
    keywords: tuple[str, ...] = ()


@dataclass(frozen=True)
class SumSimReport:
    s_r: float
    s_b: float
    s_i: Optional[float]
    s_f: Optional[float]
    s_0: float
    sumsim: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "s_r": self.s_r,
            "s_b": self.s_b,
            "s_i": self.s_i,
            "s_f": self.s_f,
            "s_0": self.s_0,
            "sumsim": self.sumsim,
            "flags": list(self.flags),
        }


def compose(
    s_r: float,
    s_b: float,
    s_i: Optional[float],
    s_f: Optional[float],
    w: SumSimWeights,
) -> SumSimReport:
    """Combine components into S_0 and SumSim.

    s_i = None renormalizes coverage/relevance (alpha treated as 0);
    s_f = None drops factuality (beta treated as 0). Both are flagged.
    """
    flags: list[str] = []
    for name, value in (("s_r", s_r), ("s_b", s_b), ("s_i", s_i), ("s_f", s_f)):
        if value is not None and not (0.0 <= value <= 1.0):
            raise ComponentOutOfRange(f"{name}={value} outside [0, 1]")

    alpha = w.alpha
    if s_i is None:
        alpha = 0.0
        flags.append("no_keywords")
        s_0 = (s_r + s_b) / 2.0
    else:
        s_0 = alpha * s_i + (1.0 - alpha) / 2.0 * (s_r + s_b)

    beta = w.beta
    if s_f is None:
        beta = 0.0
        flags.append("factuality_skipped")
        sumsim = s_0
    else:
        sumsim = beta * s_f + (1.0 - beta) * s_0

    return SumSimReport(
        s_r=s_r,
        s_b=s_b,
        s_i=s_i,
        s_f=s_f,
        s_0=s_0,
        sumsim=sumsim,
        flags=tuple(flags),
    )


def score_pair(
    candidate: str,
    reference: str,
    source_text: str,
    bundle: ScorerBundle,
    w: SumSimWeights,
) -> SumSimReport:
    s_r = rouge_l_f(normalize_tokens(candidate), normalize_tokens(reference))
    s_b = min(1.0, max(0.0, bundle.relevance.score(candidate, reference)))
    s_i = keyword_informativeness(candidate, bundle.keywords)
    s_f = None
    if bundle.factuality is not None:
        s_f = min(1.0, max(0.0, bundle.factuality.score(candidate, source_text)))
    return compose(s_r, s_b, s_i, s_f, w)


@dataclass
class CorpusReport:
    reports: list[Optional[SumSimReport]]
    means: dict[str, float]
    failed: int

    def breakdown_rows(self) -> list[dict]:
        rows = []
        for i, rep in enumerate(self.reports):
            if rep is None:
                rows.append({"pair": i, "error": True})
            else:
                rows.append({"pair": i, **rep.to_dict()})
        return rows


def evaluate_corpus(
    pairs: Sequence[tuple[str, str, str]],
    bundle: ScorerBundle,
    w: SumSimWeights,
) -> CorpusReport:
    """Score every (candidate, reference, source) triple and report
    per-dimension corpus means; failed pairs are excluded and counted."""
    if not pairs:
        raise ValueError("corpus must contain at least one pair")
    reports: list[Optional[SumSimReport]] = []
    failed = 0
    for candidate, reference, source_text in pairs:
        try:
            reports.append(score_pair(candidate, reference, source_text, bundle, w))
        except Exception:
            reports.append(None)
            failed += 1

    ok = [r for r in reports if r is not None]
    means: dict[str, float] = {}
    if ok:
        for key in ("s_r", "s_b", "s_i", "s_f", "sumsim"):
            values = [getattr(r, key) for r in ok if getattr(r, key) is not None]
            if values:
                means[key] = sum(values) / len(values)
    return CorpusReport(reports=reports, means=means, failed=failed)
