import json

import pytest

from callsum.errors import BackendUnavailable
from callsum.pseudo_label import (
    LabelingPolicy,
    PromptTemplate,
    ReplayCompletionClient,
    StubCompletionClient,
    build_prompt,
    label_segments,
    mix_datasets,
    read_pairs_jsonl,
    write_pairs_jsonl,
)


class FlakyClient:
    """Fails a configured number of times, then answers."""

    def __init__(self, failures, answer="recovered"):
        self.failures = failures
        self.answer = answer
        self.calls = 0

    def complete(self, prompt, max_tokens, temperature, stop):
        self.calls += 1
        if self.failures > 0:
            self.failures -= 1
            raise BackendUnavailable("transient outage")
        return self.answer

    def metadata(self):
        return {"backend": "flaky"}


class TestBuildPrompt:
    def test_default_layout(self):
        tpl = PromptTemplate(question="What issue did the customer report?")
        assert build_prompt("X", tpl) == (
            "X\n\nQ: What issue did the customer report?\nA:"
        )

    def test_empty_question_warns(self):
        tpl = PromptTemplate(question="")
        with pytest.warns(UserWarning):
            prompt = build_prompt("segment body", tpl)
        assert "Q: \n" in prompt

    def test_layout_missing_slot_rejected(self):
        with pytest.raises(ValueError):
            PromptTemplate(question="q", layout="{segment} only")

    def test_layout_duplicate_slot_rejected(self):
        with pytest.raises(ValueError):
            PromptTemplate(question="q", layout="{segment}{segment}{question}")


class TestLabelSegments:
    def test_cardinality_with_stub(self):
        client = StubCompletionClient(canned="OK")
        templates = [PromptTemplate(question="q1"), PromptTemplate(question="q2")]
        result = label_segments(["seg a", "seg b"], templates, client)
        assert len(result.pairs) == 4
        assert all(p.summary == "OK" for p in result.pairs)

    def test_segment_major_order(self):
        client = StubCompletionClient()
        templates = [PromptTemplate(question="q1"), PromptTemplate(question="q2")]
        result = label_segments(["first", "second"], templates, client)
        assert [p.dialogue for p in result.pairs] == [
            "first", "first", "second", "second",
        ]
        assert [p.question for p in result.pairs] == ["q1", "q2", "q1", "q2"]

    def test_empty_answers_dropped_with_counter(self):
        class MostlyEmpty:
            def __init__(self):
                self.calls = 0

            def complete(self, prompt, max_tokens, temperature, stop):
                self.calls += 1
                return "" if self.calls == 2 else "fine"

            def metadata(self):
                return {"backend": "test"}

        result = label_segments(
            ["a", "b"], [PromptTemplate(question="q1"),
                         PromptTemplate(question="q2")], MostlyEmpty()
        )
        assert len(result.pairs) == 3
        assert result.dropped_empty == 1

    def test_retries_recorded_in_provenance(self):
        client = FlakyClient(failures=2)
        result = label_segments(
            ["seg"], [PromptTemplate(question="q")], client,
            LabelingPolicy(max_retries=3),
        )
        assert result.pairs[0].provenance["retries"] == 2

    def test_exhausted_retries_raise(self):
        client = FlakyClient(failures=10)
        with pytest.raises(BackendUnavailable):
            label_segments(
                ["seg"], [PromptTemplate(question="q")], client,
                LabelingPolicy(max_retries=2),
            )

    def test_resume_cursor(self, tmp_path):
        checkpoint = tmp_path / "cursor.json"

        class FailsAtThird:
            def __init__(self):
                self.calls = 0

            def complete(self, prompt, max_tokens, temperature, stop):
                self.calls += 1
                if self.calls == 3:
                    raise BackendUnavailable("outage")
                return f"answer {self.calls}"

            def metadata(self):
                return {"backend": "test"}

        segments = ["s1", "s2", "s3", "s4"]
        templates = [PromptTemplate(question="q")]
        policy = LabelingPolicy(max_retries=0, checkpoint_path=str(checkpoint))
        with pytest.raises(BackendUnavailable):
            label_segments(segments, templates, FailsAtThird(), policy)
        assert checkpoint.exists()
        state = json.loads(checkpoint.read_text())
        assert state["cursor"] == 2

        result = label_segments(
            segments, templates, StubCompletionClient(canned="resumed"), policy
        )
        assert len(result.pairs) == 4
        assert [p.summary for p in result.pairs[:2]] == ["answer 1", "answer 2"]
        assert not checkpoint.exists()

    def test_stop_sequences_trimmed(self):
        client = StubCompletionClient(canned="the answer\nQ: another question")
        result = label_segments(["seg"], [PromptTemplate(question="q")], client)
        assert result.pairs[0].summary == "the answer"

    def test_deterministic_byte_identical(self):
        templates = [PromptTemplate(question="q1"), PromptTemplate(question="q2")]
        segments = [f"segment number {i}" for i in range(10)]
        a = label_segments(segments, templates, StubCompletionClient())
        b = label_segments(segments, templates, StubCompletionClient())
        assert [p.summary for p in a.pairs] == [p.summary for p in b.pairs]
        assert [p.dialogue for p in a.pairs] == [p.dialogue for p in b.pairs]

    def test_concurrent_workers_preserve_order(self):
        templates = [PromptTemplate(question="q1")]
        segments = [f"seg {i}" for i in range(20)]
        serial = label_segments(segments, templates, StubCompletionClient())
        parallel = label_segments(
            segments, templates, StubCompletionClient(),
            LabelingPolicy(max_workers=4),
        )
        assert [p.summary for p in serial.pairs] == [p.summary for p in parallel.pairs]

    def test_requires_inputs(self):
        with pytest.raises(ValueError):
            label_segments([], [PromptTemplate(question="q")], StubCompletionClient())


class TestMixDatasets:
    def test_counts(self):
        human = [{"dialogue": f"d{i}", "summary": "s"} for i in range(5)]
        pseudo = [{"dialogue": f"p{i}", "summary": "s", "source": "pseudo"}
                  for i in range(7)]
        mixed, counts = mix_datasets(human, pseudo, shuffle_seed=1)
        assert counts == {"human": 5, "pseudo": 7}
        assert len(mixed) == 12
        assert sum(1 for r in mixed if r["source"] == "human") == 5

    def test_multiset_preserved(self):
        human = [{"dialogue": f"d{i}", "summary": f"s{i}"} for i in range(10)]
        mixed, _ = mix_datasets(human, [], shuffle_seed=3)
        assert sorted(r["dialogue"] for r in mixed) == sorted(
            r["dialogue"] for r in human
        )

    def test_same_seed_same_order(self):
        human = [{"dialogue": f"d{i}", "summary": "s"} for i in range(20)]
        a, _ = mix_datasets(human, [], shuffle_seed=9)
        b, _ = mix_datasets(human, [], shuffle_seed=9)
        assert a == b

    def test_both_empty_rejected(self):
        with pytest.raises(ValueError):
            mix_datasets([], [])


def test_replay_client(tmp_path):
    recording = tmp_path / "rec.jsonl"
    tpl = PromptTemplate(question="q")
    prompt = build_prompt("seg", tpl)
    recording.write_text(
        json.dumps({"prompt": prompt, "completion": "recorded answer"}) + "\n"
    )
    client = ReplayCompletionClient(recording)
    result = label_segments(["seg"], [tpl], client)
    assert result.pairs[0].summary == "recorded answer"
    with pytest.raises(BackendUnavailable):
        client.complete("unseen prompt", 10, 0.0, [])


def test_jsonl_round_trip(tmp_path):
    client = StubCompletionClient()
    result = label_segments(
        ["alpha", "beta"], [PromptTemplate(question="q")], client
    )
    path = tmp_path / "pairs.jsonl"
    write_pairs_jsonl(path, result.pairs)
    records = read_pairs_jsonl(path)
    assert len(records) == 2
    assert records[0]["source"] == "pseudo"
    assert "provenance" in records[0]
