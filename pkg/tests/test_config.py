import json

import pytest

from callsum.acceptability import OpenHashBigramScorer, UniformScorer
from callsum.config import (
    build_lm,
    build_model,
    load_config_document,
    load_runtime,
    pipeline_config_from_document,
)
from callsum.summarizer import EchoSummarizer

TOML_DOC = """
[segmenter]
max_segment_tokens = 256
min_segment_turns = 1
split_penalty = 0.5

[generation]
max_summary_tokens = 24
num_beams = 2

[thresholds]
tau_accept = 40.0
tau_reject = 150.0

[weights]
alpha = 0.4
beta = 0.2

[pipeline]
perspectives = ["", "action items"]
sep_token = "<sep>"
storage_dir = "/tmp/callsum-sessions"

[model]
type = "echo"

[lm]
type = "hash"
vocab_size = 512
"""


def test_toml_document_round_trip(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text(TOML_DOC)
    doc = load_config_document(path)
    cfg = pipeline_config_from_document(doc)
    assert cfg.segmenter.max_segment_tokens == 256
    assert cfg.segmenter.split_penalty == 0.5
    assert cfg.generation.num_beams == 2
    assert cfg.thresholds.tau_accept == 40.0
    assert cfg.weights.alpha == 0.4
    assert cfg.perspectives == ("", "action items")
    assert cfg.storage_dir == "/tmp/callsum-sessions"


def test_json_document(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"thresholds": {"tau_accept": 10, "tau_reject": 20}}))
    cfg = pipeline_config_from_document(load_config_document(path))
    assert cfg.thresholds.tau_accept == 10
    assert cfg.thresholds.tau_reject == 20


def test_defaults_from_empty_document():
    cfg = pipeline_config_from_document({})
    assert cfg.thresholds.tau_accept == 50.0
    assert cfg.thresholds.tau_reject == 200.0
    assert cfg.weights.alpha == 0.3
    assert cfg.weights.beta == 0.3
    assert cfg.perspectives == ("",)


def test_env_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("CALLSUM_STORAGE_DIR", str(tmp_path / "alt"))
    monkeypatch.setenv("CALLSUM_API_TOKEN", "from-env")
    cfg = pipeline_config_from_document({"pipeline": {"storage_dir": "ignored"}})
    assert cfg.storage_dir == str(tmp_path / "alt")
    assert cfg.api_token == "from-env"


class TestBackendFactories:
    def test_echo_default(self):
        model = build_model({}, pipeline_config_from_document({}))
        assert isinstance(model, EchoSummarizer)

    def test_unknown_model_type(self):
        with pytest.raises(ValueError):
            build_model({"model": {"type": "mystery"}},
                        pipeline_config_from_document({}))

    def test_toy_requires_checkpoint(self):
        doc = {"model": {"type": "toy"}}
        with pytest.raises(ValueError):
            build_model(doc, pipeline_config_from_document(doc))

    def test_hash_lm_default(self):
        lm = build_lm({})
        assert isinstance(lm, OpenHashBigramScorer)

    def test_uniform_lm(self):
        lm = build_lm({"lm": {"type": "uniform", "vocab": ["a", "b", "c"]}})
        assert isinstance(lm, UniformScorer)

    def test_unknown_lm_type(self):
        with pytest.raises(ValueError):
            build_lm({"lm": {"type": "mystery"}})


def test_load_runtime(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text(TOML_DOC)
    cfg, model, lm = load_runtime(path)
    assert cfg.thresholds.tau_reject == 150.0
    assert isinstance(model, EchoSummarizer)
    assert isinstance(lm, OpenHashBigramScorer)
