"""Config file loading shared by the CLI and the HTTP service.

One TOML or JSON document mirrors PipelineConfig plus the model and
language-model backend specs. Environment variables override paths and
auth: CALLSUM_STORAGE_DIR, CALLSUM_API_TOKEN, CALLSUM_MODEL_CHECKPOINT.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import acceptability, segmentation, summarizer
from .metrics import SumSimWeights
from .pipeline import PipelineConfig


def load_config_document(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text(encoding="utf-8"))
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def pipeline_config_from_document(doc: dict[str, Any]) -> PipelineConfig:
    seg = doc.get("segmenter", {})
    gen = doc.get("generation", {})
    th = doc.get("thresholds", {})
    w = doc.get("weights", {})
    pipe = doc.get("pipeline", {})
    model = doc.get("model", {})

    cfg = PipelineConfig(
        segmenter=segmentation.SegmenterConfig(
            max_segment_tokens=seg.get("max_segment_tokens", 512),
            min_segment_turns=seg.get("min_segment_turns", 2),
            embedding_dim=seg.get("embedding_dim", 32),
            split_penalty=seg.get("split_penalty", 0.0),
        ),
        generation=summarizer.GenerationParams(
            max_summary_tokens=gen.get("max_summary_tokens", 32),
            num_beams=gen.get("num_beams", 1),
            length_penalty=gen.get("length_penalty", 1.0),
            seed=gen.get("seed", 0),
        ),
        thresholds=acceptability.AcceptabilityThresholds(
            tau_accept=th.get("tau_accept", 50.0),
            tau_reject=th.get("tau_reject", 200.0),
        ),
        weights=SumSimWeights(
            alpha=w.get("alpha", 0.3), beta=w.get("beta", 0.3)
        ),
        perspectives=tuple(pipe.get("perspectives", [""])),
        sep_token=pipe.get("sep_token", "<sep>"),
        storage_dir=os.environ.get(
            "CALLSUM_STORAGE_DIR", pipe.get("storage_dir", "sessions")
        ),
        model_checkpoint=os.environ.get(
            "CALLSUM_MODEL_CHECKPOINT", model.get("checkpoint")
        ),
        api_token=os.environ.get("CALLSUM_API_TOKEN", pipe.get("api_token")),
    )
    return cfg


def build_model(doc: dict[str, Any], cfg: PipelineConfig):
    """Summarizer backend from the [model] section."""
    spec = doc.get("model", {})
    kind = spec.get("type", "echo")
    if kind == "echo":
        return summarizer.EchoSummarizer(
            max_input_tokens=spec.get("max_input_tokens", 1024)
        )
    if kind == "toy":
        checkpoint = cfg.model_checkpoint or spec.get("checkpoint")
        if not checkpoint:
            raise ValueError("toy model requires a checkpoint path")
        return summarizer.load_checkpoint(checkpoint)
    raise ValueError(f"unknown model type {kind!r}")


def build_lm(doc: dict[str, Any]):
    """Acceptability scorer from the [lm] section."""
    spec = doc.get("lm", {})
    kind = spec.get("type", "hash")
    if kind == "hash":
        return acceptability.OpenHashBigramScorer(
            vocab_size=spec.get("vocab_size", 4096),
            sharpness=spec.get("sharpness", 2.0),
        )
    if kind == "uniform":
        return acceptability.UniformScorer(spec.get("vocab", ["the", "a"]))
    raise ValueError(f"unknown lm type {kind!r}")


def load_runtime(path: str | Path):
    """(PipelineConfig, summarizer backend, LM scorer) from one file."""
    doc = load_config_document(path)
    cfg = pipeline_config_from_document(doc)
    return cfg, build_model(doc, cfg), build_lm(doc)
