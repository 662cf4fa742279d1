"""Speaker/turn-aware encoder-decoder summarization.

The encoder input is the sum of token, position, speaker, and turn
position embeddings. Speaker and turn indices are inferred from a
special separator token between turns: the turn id increments on the
token immediately after each separator, and the speaker id alternates
as turn mod num_speakers. A small transformer seq2seq built on these
tables supports generation and fine-tuning at toy scale; production
binds a pretrained checkpoint behind the same interface.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import DivergenceDetected, EmptyGeneration, IndexOutOfRange

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3
SEP_ID = 4
SPECIAL_TOKENS = ["<pad>", "<s>", "</s>", "<unk>", "<sep>"]

INIT_ZERO = "zero"
INIT_RANDOM_NORMAL = "random_normal"


@dataclass(frozen=True)
class DialogEncoderConfig:
    vocab_size: int
    hidden_dim: int = 32
    max_positions: int = 256
    num_speakers: int = 2
    max_turns: int = 64
    sep_token_id: int = SEP_ID
    speaker_turn_init: str = INIT_RANDOM_NORMAL
    init_sigma: float = 0.02

    def __post_init__(self):
        if self.num_speakers < 2:
            raise ValueError("num_speakers must be >= 2")
        if self.max_turns < 1:
            raise ValueError("max_turns must be >= 1")
        if not 0 <= self.sep_token_id < self.vocab_size:
            raise ValueError("sep_token_id outside the vocabulary")
        if self.speaker_turn_init not in (INIT_ZERO, INIT_RANDOM_NORMAL):
            raise ValueError(f"unknown init mode {self.speaker_turn_init!r}")


@dataclass(frozen=True)
class GenerationParams:
    max_summary_tokens: int = 32
    num_beams: int = 1
    length_penalty: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.max_summary_tokens < 1:
            raise ValueError("max_summary_tokens must be >= 1")
        if self.num_beams < 1:
            raise ValueError("num_beams must be >= 1")


def infer_speaker_turn_indices(
    token_ids: Sequence[int],
    sep_token_id: int,
    num_speakers: int = 2,
    max_turns: Optional[int] = None,
) -> tuple[list[int], list[int]]:
    """Derive speaker and turn ids from separator positions.

    The separator carries the ids of the turn it terminates; the turn id
    increments on the token after it. Turn ids clamp to max_turns - 1
    (with a warning) when the dialogue is longer than the turn table.
    """
    if len(token_ids) == 0:
        raise ValueError("token sequence must be non-empty")
    turn_ids: list[int] = []
    turn = 0
    for tok in token_ids:
        turn_ids.append(turn)
        if tok == sep_token_id:
            turn += 1
    if max_turns is not None and turn_ids[-1] >= max_turns:
        warnings.warn(
            f"dialogue has {turn_ids[-1] + 1} turns, clamping to {max_turns}",
            stacklevel=2,
        )
        turn_ids = [min(t, max_turns - 1) for t in turn_ids]
    speaker_ids = [t % num_speakers for t in turn_ids]
    return speaker_ids, turn_ids


@dataclass(frozen=True)
class DialogInputBatch:
    token_ids: np.ndarray
    speaker_ids: np.ndarray
    turn_ids: np.ndarray
    attention_mask: np.ndarray

    def __post_init__(self):
        shape = self.token_ids.shape
        for name in ("speaker_ids", "turn_ids", "attention_mask"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} shape differs from token_ids")
        if np.any(np.diff(self.turn_ids, axis=1) < 0):
            raise ValueError("turn_ids must be non-decreasing along each row")


@dataclass(frozen=True)
class EmbeddingTables:
    token_table: np.ndarray
    position_table: np.ndarray
    speaker_table: np.ndarray
    turn_table: np.ndarray

    def __post_init__(self):
        dims = {
            self.token_table.shape[1],
            self.position_table.shape[1],
            self.speaker_table.shape[1],
            self.turn_table.shape[1],
        }
        if len(dims) != 1:
            raise ValueError(f"embedding tables disagree on dimension: {dims}")


def compose_input_embeddings(
    batch: DialogInputBatch, tables: EmbeddingTables
) -> np.ndarray:
    """Sum token, position, speaker, and turn embeddings per position."""
    b, s = batch.token_ids.shape
    checks = [
        ("token_ids", batch.token_ids, tables.token_table.shape[0]),
        ("speaker_ids", batch.speaker_ids, tables.speaker_table.shape[0]),
        ("turn_ids", batch.turn_ids, tables.turn_table.shape[0]),
    ]
    for name, ids, size in checks:
        if ids.min() < 0 or ids.max() >= size:
            raise IndexOutOfRange(f"{name} outside table of size {size}")
    if s > tables.position_table.shape[0]:
        raise IndexOutOfRange(
            f"sequence length {s} exceeds position table "
            f"of size {tables.position_table.shape[0]}"
        )
    return (
        tables.token_table[batch.token_ids]
        + tables.position_table[np.arange(s)][None, :, :]
        + tables.speaker_table[batch.speaker_ids]
        + tables.turn_table[batch.turn_ids]
    )


class WordTokenizer:
    """Whitespace word-level tokenizer with a fixed vocabulary."""

    def __init__(self, vocab: Sequence[str]):
        if list(vocab[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocab must start with the special tokens")
        self.vocab = list(vocab)
        self.token_to_id = {tok: i for i, tok in enumerate(self.vocab)}

    @classmethod
    def build(cls, texts: Sequence[str], max_size: int = 5000) -> "WordTokenizer":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in text.split():
                if tok not in SPECIAL_TOKENS:
                    counts[tok] = counts.get(tok, 0) + 1
        ranked = sorted(counts, key=lambda t: (-counts[t], t))
        budget = max(0, max_size - len(SPECIAL_TOKENS))
        return cls(SPECIAL_TOKENS + ranked[:budget])

    def __len__(self) -> int:
        return len(self.vocab)

    @property
    def sep_token(self) -> str:
        return self.vocab[SEP_ID]

    def encode(self, text: str, add_eos: bool = False) -> list[int]:
        ids = [self.token_to_id.get(tok, UNK_ID) for tok in text.split()]
        return ids + [EOS_ID] if add_eos else ids

    def decode(self, ids: Sequence[int]) -> str:
        keep = [i for i in ids if i not in (PAD_ID, BOS_ID, EOS_ID)]
        return " ".join(self.vocab[i] for i in keep)

    def count_tokens(self, text: str) -> int:
        return len(text.split())


class DialogSeq2Seq(nn.Module):
    """Toy transformer encoder-decoder with speaker/turn tables.

    Same architecture serves as its own baseline: encoding with
    add_speaker_turn=False skips the two extra tables, leaving the
    token+position representation unchanged.
    """

    def __init__(
        self,
        cfg: DialogEncoderConfig,
        num_layers: int = 2,
        num_heads: int = 4,
        ffn_dim: int = 64,
        use_speaker_turn: bool = True,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        self.cfg = cfg
        self.use_speaker_turn = use_speaker_turn
        d = cfg.hidden_dim
        self.token_emb = nn.Embedding(cfg.vocab_size, d, dtype=dtype)
        self.pos_emb = nn.Embedding(cfg.max_positions, d, dtype=dtype)
        self.speaker_emb = nn.Embedding(cfg.num_speakers, d, dtype=dtype)
        self.turn_emb = nn.Embedding(cfg.max_turns, d, dtype=dtype)
        if cfg.speaker_turn_init == INIT_ZERO:
            nn.init.zeros_(self.speaker_emb.weight)
            nn.init.zeros_(self.turn_emb.weight)
        else:
            nn.init.normal_(self.speaker_emb.weight, std=cfg.init_sigma)
            nn.init.normal_(self.turn_emb.weight, std=cfg.init_sigma)

        enc_layer = nn.TransformerEncoderLayer(
            d, num_heads, ffn_dim, dropout=0.0, batch_first=True, dtype=dtype
        )
        dec_layer = nn.TransformerDecoderLayer(
            d, num_heads, ffn_dim, dropout=0.0, batch_first=True, dtype=dtype
        )
        self.encoder = nn.TransformerEncoder(enc_layer, num_layers)
        self.decoder = nn.TransformerDecoder(dec_layer, num_layers)
        self.lm_head = nn.Linear(d, cfg.vocab_size, dtype=dtype)

    def _input_states(self, token_ids, speaker_ids, turn_ids, add_speaker_turn):
        seq = token_ids.shape[1]
        positions = torch.arange(seq, device=token_ids.device)
        x = self.token_emb(token_ids) + self.pos_emb(positions)[None, :, :]
        if add_speaker_turn:
            x = x + self.speaker_emb(speaker_ids) + self.turn_emb(turn_ids)
        return x

    def encode(
        self,
        token_ids: torch.Tensor,
        speaker_ids: torch.Tensor,
        turn_ids: torch.Tensor,
        attention_mask: Optional[torch.Tensor] = None,
        add_speaker_turn: Optional[bool] = None,
    ) -> torch.Tensor:
        if add_speaker_turn is None:
            add_speaker_turn = self.use_speaker_turn
        x = self._input_states(token_ids, speaker_ids, turn_ids, add_speaker_turn)
        pad_mask = None
        if attention_mask is not None:
            pad_mask = attention_mask == 0
        return self.encoder(x, src_key_padding_mask=pad_mask)

    def decode_logits(self, memory, decoder_ids, memory_pad_mask=None):
        seq = decoder_ids.shape[1]
        positions = torch.arange(seq, device=decoder_ids.device)
        y = self.token_emb(decoder_ids) + self.pos_emb(positions)[None, :, :]
        causal = nn.Transformer.generate_square_subsequent_mask(
            seq, device=decoder_ids.device, dtype=y.dtype
        )
        hidden = self.decoder(
            y, memory, tgt_mask=causal, memory_key_padding_mask=memory_pad_mask
        )
        return self.lm_head(hidden)

    def loss(
        self,
        token_ids: torch.Tensor,
        speaker_ids: torch.Tensor,
        turn_ids: torch.Tensor,
        attention_mask: torch.Tensor,
        target_ids: torch.Tensor,
    ) -> torch.Tensor:
        """Teacher-forced cross-entropy; targets are padded with PAD_ID."""
        memory = self.encode(token_ids, speaker_ids, turn_ids, attention_mask)
        memory_pad = attention_mask == 0
        decoder_in = torch.cat(
            [
                torch.full_like(target_ids[:, :1], BOS_ID),
                target_ids[:, :-1],
            ],
            dim=1,
        )
        logits = self.decode_logits(memory, decoder_in, memory_pad)
        return F.cross_entropy(
            logits.reshape(-1, logits.shape[-1]),
            target_ids.reshape(-1),
            ignore_index=PAD_ID,
        )

    @torch.no_grad()
    def generate(
        self,
        token_ids: torch.Tensor,
        speaker_ids: torch.Tensor,
        turn_ids: torch.Tensor,
        params: GenerationParams,
    ) -> list[int]:
        """Generate output ids for a single sequence (batch of 1)."""
        torch.manual_seed(params.seed)
        memory = self.encode(token_ids, speaker_ids, turn_ids)
        if params.num_beams == 1:
            return self._greedy(memory, params)
        return self._beam(memory, params)

    def _greedy(self, memory, params):
        out = [BOS_ID]
        for step in range(params.max_summary_tokens):
            ids = torch.tensor([out], dtype=torch.long, device=memory.device)
            logits = self.decode_logits(memory, ids)[0, -1]
            if step == 0:
                logits[EOS_ID] = float("-inf")  # force at least one token
            nxt = int(torch.argmax(logits))
            if nxt == EOS_ID:
                break
            out.append(nxt)
        return out[1:]

    def _beam(self, memory, params):
        beams: list[tuple[float, list[int], bool]] = [(0.0, [BOS_ID], False)]
        for step in range(params.max_summary_tokens):
            candidates = []
            for logp, seq, done in beams:
                if done:
                    candidates.append((logp, seq, True))
                    continue
                ids = torch.tensor([seq], dtype=torch.long, device=memory.device)
                logits = self.decode_logits(memory, ids)[0, -1]
                if step == 0:
                    logits[EOS_ID] = float("-inf")
                logprobs = F.log_softmax(logits, dim=-1)
                top = torch.topk(logprobs, params.num_beams)
                for lp, tok in zip(top.values.tolist(), top.indices.tolist()):
                    candidates.append((logp + lp, seq + [tok], tok == EOS_ID))
            candidates.sort(
                key=lambda c: c[0] / max(1, len(c[1]) - 1) ** params.length_penalty,
                reverse=True,
            )
            beams = candidates[: params.num_beams]
            if all(done for _, _, done in beams):
                break
        best = beams[0][1]
        return [tok for tok in best[1:] if tok != EOS_ID]


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    epochs: int = 5
    batch_size: int = 16
    seed: int = 0
    max_input_tokens: int = 128
    max_target_tokens: int = 32


def _pad(rows: list[list[int]], pad_value: int = PAD_ID) -> torch.Tensor:
    width = max(len(r) for r in rows)
    return torch.tensor(
        [r + [pad_value] * (width - len(r)) for r in rows], dtype=torch.long
    )


def encode_dialogue(
    tokenizer: WordTokenizer,
    dialogue: str,
    cfg: DialogEncoderConfig,
    max_tokens: Optional[int] = None,
) -> tuple[list[int], list[int], list[int]]:
    """Token ids plus inferred speaker/turn ids, optionally truncated."""
    ids = tokenizer.encode(dialogue)
    truncated = max_tokens is not None and len(ids) > max_tokens
    if truncated:
        ids = ids[:max_tokens]
    if not ids:
        ids = [UNK_ID]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        speakers, turns = infer_speaker_turn_indices(
            ids, cfg.sep_token_id, cfg.num_speakers, cfg.max_turns
        )
    return ids, speakers, turns


def make_batches(
    pairs: Sequence[tuple[str, str]],
    tokenizer: WordTokenizer,
    cfg: DialogEncoderConfig,
    hyper: TrainingConfig,
    order: Sequence[int],
) -> list[dict[str, torch.Tensor]]:
    batches = []
    for start in range(0, len(order), hyper.batch_size):
        chunk = [pairs[i] for i in order[start : start + hyper.batch_size]]
        tok_rows, spk_rows, trn_rows, tgt_rows = [], [], [], []
        for dialogue, summary in chunk:
            ids, speakers, turns = encode_dialogue(
                tokenizer, dialogue, cfg, hyper.max_input_tokens
            )
            tok_rows.append(ids)
            spk_rows.append(speakers)
            trn_rows.append(turns)
            tgt = tokenizer.encode(summary, add_eos=True)
            tgt_rows.append(tgt[: hyper.max_target_tokens])
        token_ids = _pad(tok_rows)
        batches.append(
            {
                "token_ids": token_ids,
                "speaker_ids": _pad(spk_rows, 0),
                "turn_ids": _pad(trn_rows, 0),
                "attention_mask": (token_ids != PAD_ID).long(),
                "target_ids": _pad(tgt_rows),
            }
        )
    return batches


def fine_tune(
    model: DialogSeq2Seq,
    tokenizer: WordTokenizer,
    train_pairs: Sequence[tuple[str, str]],
    hyper: TrainingConfig,
) -> tuple[dict, list[float]]:
    """Fine-tune on (dialogue, summary) pairs.

    Returns the updated state dict and the per-epoch token-weighted mean
    cross-entropy. Reproducible given hyper.seed.
    """
    if not train_pairs:
        raise ValueError("at least one training pair is required")
    if hyper.epochs == 0:
        return {k: v.clone() for k, v in model.state_dict().items()}, []

    torch.manual_seed(hyper.seed)
    rng = np.random.default_rng(hyper.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=hyper.learning_rate)
    loss_history: list[float] = []
    model.train()
    for _ in range(hyper.epochs):
        order = rng.permutation(len(train_pairs))
        total_loss, total_tokens = 0.0, 0
        for batch in make_batches(train_pairs, tokenizer, model.cfg, hyper, order):
            optimizer.zero_grad()
            loss = model.loss(**batch)
            if not torch.isfinite(loss):
                raise DivergenceDetected("training loss became non-finite")
            loss.backward()
            optimizer.step()
            n_tokens = int((batch["target_ids"] != PAD_ID).sum())
            total_loss += float(loss.detach()) * n_tokens
            total_tokens += n_tokens
        loss_history.append(total_loss / max(1, total_tokens))
    model.eval()
    return {k: v.clone() for k, v in model.state_dict().items()}, loss_history


def mean_eval_loss(
    model: DialogSeq2Seq,
    tokenizer: WordTokenizer,
    pairs: Sequence[tuple[str, str]],
    hyper: TrainingConfig,
) -> float:
    """Token-weighted mean cross-entropy without gradient updates."""
    model.eval()
    total_loss, total_tokens = 0.0, 0
    with torch.no_grad():
        for batch in make_batches(
            pairs, tokenizer, model.cfg, hyper, range(len(pairs))
        ):
            loss = model.loss(**batch)
            n_tokens = int((batch["target_ids"] != PAD_ID).sum())
            total_loss += float(loss) * n_tokens
            total_tokens += n_tokens
    return total_loss / max(1, total_tokens)


class SummarizerBackend(Protocol):
    """Narrow interface the pipeline binds against."""

    max_input_tokens: int

    def count_tokens(self, text: str) -> int: ...

    def summarize(self, text: str, params: GenerationParams) -> str: ...


class EchoSummarizer:
    """Deterministic stub: returns the input's first sentence."""

    def __init__(self, max_input_tokens: int = 1024):
        self.max_input_tokens = max_input_tokens

    def count_tokens(self, text: str) -> int:
        return len(text.split())

    def summarize(self, text: str, params: GenerationParams) -> str:
        for stop in (".", "?", "!"):
            pos = text.find(stop)
            if pos != -1:
                return text[: pos + 1].strip()
        return text.strip()


class ToySummarizer:
    """DialogSeq2Seq plus tokenizer bound behind the backend interface."""

    def __init__(
        self,
        model: DialogSeq2Seq,
        tokenizer: WordTokenizer,
        max_input_tokens: int = 128,
    ):
        self.model = model
        self.tokenizer = tokenizer
        self.max_input_tokens = min(max_input_tokens, model.cfg.max_positions)

    def count_tokens(self, text: str) -> int:
        return self.tokenizer.count_tokens(text)

    def summarize(self, text: str, params: GenerationParams) -> str:
        ids, speakers, turns = encode_dialogue(
            self.tokenizer, text, self.model.cfg, self.max_input_tokens
        )
        as_tensor = lambda xs: torch.tensor([xs], dtype=torch.long)
        out = self.model.generate(
            as_tensor(ids), as_tensor(speakers), as_tensor(turns), params
        )
        return self.tokenizer.decode(out)

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, self.model, self.tokenizer)


def generate_highlight(
    segment_text: str,
    model: SummarizerBackend,
    params: GenerationParams,
) -> str:
    """Generate one highlight for a segment, truncating oversized input."""
    if not segment_text.strip():
        raise ValueError("segment text must be non-empty")
    if model.count_tokens(segment_text) > model.max_input_tokens:
        warnings.warn(
            "segment exceeds the model window; input truncated", stacklevel=2
        )
        segment_text = " ".join(segment_text.split()[: model.max_input_tokens])
    text = model.summarize(segment_text, params).strip()
    if not text:
        greedy = GenerationParams(
            max_summary_tokens=params.max_summary_tokens,
            num_beams=1,
            seed=params.seed,
        )
        text = model.summarize(segment_text, greedy).strip()
    if not text:
        raise EmptyGeneration("model produced an empty summary twice")
    return text


def save_checkpoint(
    path: str | Path, model: DialogSeq2Seq, tokenizer: WordTokenizer
) -> None:
    """Checkpoint directory: config manifest (JSON) + weights blob."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    cfg = model.cfg
    manifest = {
        "vocab_size": cfg.vocab_size,
        "hidden_dim": cfg.hidden_dim,
        "max_positions": cfg.max_positions,
        "num_speakers": cfg.num_speakers,
        "max_turns": cfg.max_turns,
        "sep_token": tokenizer.sep_token,
        "sep_token_id": cfg.sep_token_id,
        "speaker_turn_init": cfg.speaker_turn_init,
        "init_sigma": cfg.init_sigma,
        "use_speaker_turn": model.use_speaker_turn,
        "num_layers": model.encoder.num_layers,
        "vocab": tokenizer.vocab,
    }
    (path / "config.json").write_text(json.dumps(manifest), encoding="utf-8")
    torch.save(model.state_dict(), path / "weights.pt")


def load_checkpoint(path: str | Path) -> ToySummarizer:
    path = Path(path)
    manifest = json.loads((path / "config.json").read_text(encoding="utf-8"))
    cfg = DialogEncoderConfig(
        vocab_size=manifest["vocab_size"],
        hidden_dim=manifest["hidden_dim"],
        max_positions=manifest["max_positions"],
        num_speakers=manifest["num_speakers"],
        max_turns=manifest["max_turns"],
        sep_token_id=manifest["sep_token_id"],
        speaker_turn_init=manifest["speaker_turn_init"],
        init_sigma=manifest["init_sigma"],
    )
    model = DialogSeq2Seq(
        cfg,
        num_layers=manifest["num_layers"],
        use_speaker_turn=manifest["use_speaker_turn"],
    )
    model.load_state_dict(torch.load(path / "weights.pt", weights_only=True))
    model.eval()
    tokenizer = WordTokenizer(manifest["vocab"])
    return ToySummarizer(model, tokenizer)
