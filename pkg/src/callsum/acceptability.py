"""Perplexity-based acceptability scoring and three-way routing.

Each highlight is scored by a language model: PP is the geometric mean
of inverse next-token probabilities, with the first token conditioned
on but never predicted. Two thresholds route the highlight to accept,
review, or reject.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import DivergenceDetected, TooShort
from .transcript import HighlightStatus


class LanguageModelScorer(Protocol):
    """Next-token distribution over a fixed vocabulary.

    encode() must prepend a start-of-text id, so the first id is
    conditioning context only.
    """

    vocab_size: int

    def encode(self, text: str) -> list[int]: ...

    def next_token_distribution(self, prefix: Sequence[int]) -> np.ndarray: ...


@dataclass(frozen=True)
class AcceptabilityThresholds:
    tau_accept: float
    tau_reject: float

    def __post_init__(self):
        if self.tau_accept <= 1 or self.tau_reject <= 1:
            raise ValueError("thresholds must be > 1")
        if self.tau_accept >= self.tau_reject:
            raise ValueError("tau_accept must be < tau_reject")


def token_log_probs(ids: Sequence[int], lm: LanguageModelScorer) -> list[float]:
    """log p(w_k | w_0..w_{k-1}) for each predicted token k >= 1."""
    out = []
    for k in range(1, len(ids)):
        dist = lm.next_token_distribution(ids[:k])
        p = float(dist[ids[k]])
        out.append(math.log(p) if p > 0 else float("-inf"))
    return out


def perplexity(text: str, lm: LanguageModelScorer) -> float:
    """PP of a text under the scorer; any zero-probability token gives +inf."""
    ids = lm.encode(text)
    if len(ids) < 2:
        raise TooShort("need at least one predicted token after the start token")
    logps = token_log_probs(ids, lm)
    if any(math.isinf(lp) for lp in logps):
        return float("inf")
    return math.exp(-sum(logps) / len(logps))


def classify_highlight(
    pp: float, th: AcceptabilityThresholds
) -> HighlightStatus:
    if pp <= th.tau_accept:
        return HighlightStatus.ACCEPT
    if pp <= th.tau_reject:
        return HighlightStatus.REVIEW
    return HighlightStatus.REJECT


def evaluate_acceptability(
    lm: LanguageModelScorer,
    labeled: Sequence[tuple[str, bool]],
    th: AcceptabilityThresholds,
) -> float:
    """Binary accuracy: ACCEPT and REVIEW count as acceptable."""
    if not labeled:
        raise ValueError("labeled set must be non-empty")
    correct = 0
    for sentence, is_acceptable in labeled:
        status = classify_highlight(perplexity(sentence, lm), th)
        predicted = status != HighlightStatus.REJECT
        correct += int(predicted == is_acceptable)
    return correct / len(labeled)


def calibrate_thresholds(
    lm: LanguageModelScorer,
    good_summaries: Sequence[str],
    accept_percentile: float = 90.0,
    reject_percentile: float = 99.0,
) -> AcceptabilityThresholds:
    """Thresholds from PP percentiles over known-good summaries."""
    if not good_summaries:
        raise ValueError("need at least one calibration summary")
    pps = [perplexity(s, lm) for s in good_summaries]
    finite = [p for p in pps if math.isfinite(p)] or [2.0]
    tau_accept = float(np.percentile(finite, accept_percentile))
    tau_reject = float(np.percentile(finite, reject_percentile))
    tau_accept = max(tau_accept, 1.0 + 1e-9)
    if tau_reject <= tau_accept:
        tau_reject = tau_accept * 1.5
    return AcceptabilityThresholds(tau_accept, tau_reject)


class _WordVocabMixin:
    """Shared word-level encoding with BOS over a fixed word list."""

    def __init__(self, vocab: Sequence[str]):
        self.vocab = ["<s>"] + [w for w in vocab if w != "<s>"] + ["<unk>"]
        self.vocab_size = len(self.vocab)
        self.word_to_id = {w: i for i, w in enumerate(self.vocab)}
        self.unk_id = self.vocab_size - 1

    def encode(self, text: str) -> list[int]:
        return [0] + [
            self.word_to_id.get(w, self.unk_id) for w in text.lower().split()
        ]


class UniformScorer(_WordVocabMixin):
    """Assigns 1/vocab_size to every next token. For tests and baselines."""

    def next_token_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        return np.full(self.vocab_size, 1.0 / self.vocab_size)


class TableScorer:
    """Scorer backed by an explicit conditional-probability table.

    `table` maps a prefix tuple to a distribution; missing prefixes fall
    back to uniform. Used to construct exact-PP test cases.
    """

    def __init__(self, vocab_size: int, table: dict[tuple[int, ...], np.ndarray]):
        self.vocab_size = vocab_size
        self.table = table

    def encode(self, text: str) -> list[int]:
        raise NotImplementedError("TableScorer scores pre-encoded ids only")

    def next_token_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        dist = self.table.get(tuple(prefix))
        if dist is None:
            return np.full(self.vocab_size, 1.0 / self.vocab_size)
        return np.asarray(dist, dtype=float)


class HashBigramScorer(_WordVocabMixin):
    """Deterministic pseudo-LM: the distribution after a token is a fixed
    softmax of hash-derived logits. No training, no files; gives varied,
    reproducible perplexities for pipelines and demos."""

    def __init__(self, vocab: Sequence[str], sharpness: float = 2.0):
        super().__init__(vocab)
        self.sharpness = sharpness
        self._cache: dict[int, np.ndarray] = {}

    def _dist_after(self, token_id: int) -> np.ndarray:
        if token_id not in self._cache:
            digest = hashlib.sha256(f"bigram:{token_id}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            logits = rng.standard_normal(self.vocab_size) * self.sharpness
            exp = np.exp(logits - logits.max())
            self._cache[token_id] = exp / exp.sum()
        return self._cache[token_id]

    def next_token_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        return self._dist_after(int(prefix[-1]))


class OpenHashBigramScorer:
    """Hash-derived pseudo-LM with an open vocabulary: every word maps to
    a bucket via a salted hash, so arbitrary text gets varied but fully
    reproducible perplexities without any model files."""

    def __init__(self, vocab_size: int = 4096, sharpness: float = 2.0):
        self.vocab_size = vocab_size
        self.sharpness = sharpness
        self._cache: dict[int, np.ndarray] = {}

    def encode(self, text: str) -> list[int]:
        ids = [0]
        for word in text.lower().split():
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            ids.append(1 + int.from_bytes(digest[:8], "little") % (self.vocab_size - 1))
        return ids

    def next_token_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        token_id = int(prefix[-1])
        if token_id not in self._cache:
            digest = hashlib.sha256(f"open-bigram:{token_id}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            logits = rng.standard_normal(self.vocab_size) * self.sharpness
            exp = np.exp(logits - logits.max())
            self._cache[token_id] = exp / exp.sum()
        return self._cache[token_id]


class BigramLM(nn.Module, _WordVocabMixin):
    """Trainable neural bigram LM: embedding -> linear -> softmax."""

    def __init__(self, vocab: Sequence[str], hidden_dim: int = 16, seed: int = 0):
        nn.Module.__init__(self)
        _WordVocabMixin.__init__(self, vocab)
        torch.manual_seed(seed)
        self.embed = nn.Embedding(self.vocab_size, hidden_dim)
        self.proj = nn.Linear(hidden_dim, self.vocab_size)

    def logits(self, prev_ids: torch.Tensor) -> torch.Tensor:
        return self.proj(self.embed(prev_ids))

    @torch.no_grad()
    def next_token_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        prev = torch.tensor([int(prefix[-1])], dtype=torch.long)
        return F.softmax(self.logits(prev)[0], dim=-1).numpy()


@dataclass(frozen=True)
class LMTrainingConfig:
    learning_rate: float = 0.05
    epochs: int = 5
    batch_size: int = 64
    seed: int = 0


def fine_tune_lm(
    lm: BigramLM, summaries: Sequence[str], hyper: LMTrainingConfig
) -> dict:
    """Self-supervised next-token training; returns the updated state dict."""
    if not summaries:
        raise ValueError("training corpus must be non-empty")
    if hyper.epochs == 0:
        return {k: v.clone() for k, v in lm.state_dict().items()}

    pairs: list[tuple[int, int]] = []
    for text in summaries:
        ids = lm.encode(text)
        pairs.extend(zip(ids[:-1], ids[1:]))
    if not pairs:
        raise ValueError("no token transitions in the corpus")

    torch.manual_seed(hyper.seed)
    rng = np.random.default_rng(hyper.seed)
    optimizer = torch.optim.Adam(lm.parameters(), lr=hyper.learning_rate)
    prev = torch.tensor([p for p, _ in pairs], dtype=torch.long)
    nxt = torch.tensor([n for _, n in pairs], dtype=torch.long)
    lm.train()
    for _ in range(hyper.epochs):
        order = torch.tensor(rng.permutation(len(pairs)), dtype=torch.long)
        for start in range(0, len(pairs), hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            optimizer.zero_grad()
            loss = F.cross_entropy(lm.logits(prev[idx]), nxt[idx])
            if not torch.isfinite(loss):
                raise DivergenceDetected("LM training loss became non-finite")
            loss.backward()
            optimizer.step()
    lm.eval()
    return {k: v.clone() for k, v in lm.state_dict().items()}


def mean_perplexity(lm: LanguageModelScorer, texts: Sequence[str]) -> float:
    return float(np.mean([perplexity(t, lm) for t in texts]))
