"""Command-line front door over the pipeline.

stdout carries machine-readable JSON/JSONL only; diagnostics go to
stderr. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import acceptability, config, metrics, pipeline, pseudo_label, summarizer
from .segmentation import HashEmbedder, segment_transcript
from .transcript import parse_transcript


def _log(message: str) -> None:
    click.echo(message, err=True)


def _emit(payload) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False))


def _read_transcript(path: str, fmt: str):
    raw = Path(path).read_bytes()
    return parse_transcript(raw, fmt)


@click.group()
def cli():
    """Sales-call summarization toolkit."""


@cli.command()
@click.option("--transcript", "transcript_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="json_turns",
              type=click.Choice(["json_turns", "two_column_text"]))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
def summarize(transcript_path, fmt, config_path, out_path):
    """Run the full pipeline on one transcript."""
    cfg, model, lm = config.load_runtime(config_path)
    t = _read_transcript(transcript_path, fmt)
    session = pipeline.summarize_call(t, cfg, model, lm)
    store = pipeline.SessionStore(cfg.storage_dir)
    store.save(session)
    doc = session.to_dict()
    if out_path:
        Path(out_path).write_text(
            json.dumps(doc, ensure_ascii=False, indent=2), encoding="utf-8"
        )
        _log(f"session {session.session_id} written to {out_path}")
        _emit({"session_id": session.session_id, "highlights": len(session.highlights)})
    else:
        _emit(doc)


@cli.command()
@click.option("--transcript", "transcript_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="json_turns",
              type=click.Choice(["json_turns", "two_column_text"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--max-tokens", default=512, type=int)
@click.option("--penalty", default=0.0, type=float)
def segment(transcript_path, fmt, config_path, max_tokens, penalty):
    """Segment a transcript and print the spans."""
    if config_path:
        cfg, _, _ = config.load_runtime(config_path)
        seg_cfg = cfg.segmenter
    else:
        from .segmentation import SegmenterConfig

        seg_cfg = SegmenterConfig(
            max_segment_tokens=max_tokens, split_penalty=penalty
        )
    t = _read_transcript(transcript_path, fmt)
    segments = segment_transcript(t, HashEmbedder(seg_cfg.embedding_dim), seg_cfg)
    _emit(
        [
            {"index": s.index, "first_turn": s.first_turn, "last_turn": s.last_turn}
            for s in segments
        ]
    )


@cli.command()
@click.option("--candidate", required=True, type=click.Path(exists=True))
@click.option("--reference", required=True, type=click.Path(exists=True))
@click.option("--source", required=True, type=click.Path(exists=True))
@click.option("--keywords", default=None, type=click.Path(exists=True))
@click.option("--alpha", default=metrics.DEFAULT_ALPHA, type=float)
@click.option("--beta", default=metrics.DEFAULT_BETA, type=float)
def score(candidate, reference, source, keywords, alpha, beta):
    """SumSim report for one candidate/reference/source triple."""
    kw = ()
    if keywords:
        kw = tuple(
            line.strip()
            for line in Path(keywords).read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
    bundle = metrics.ScorerBundle(keywords=kw)
    report = metrics.score_pair(
        Path(candidate).read_text(encoding="utf-8"),
        Path(reference).read_text(encoding="utf-8"),
        Path(source).read_text(encoding="utf-8"),
        bundle,
        metrics.SumSimWeights(alpha=alpha, beta=beta),
    )
    _emit(report.to_dict())


@cli.command()
@click.option("--corpus", required=True, type=click.Path(exists=True),
              help='JSONL of {"candidate","reference","source"}')
@click.option("--keywords", default=None, type=click.Path(exists=True))
@click.option("--alpha", default=metrics.DEFAULT_ALPHA, type=float)
@click.option("--beta", default=metrics.DEFAULT_BETA, type=float)
@click.option("--jobs", default=1, type=int)
def evaluate(corpus, keywords, alpha, beta, jobs):
    """Corpus-level SumSim breakdown (per-pair JSONL + means)."""
    pairs = []
    with open(corpus, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                pairs.append((rec["candidate"], rec["reference"], rec["source"]))
    kw = ()
    if keywords:
        kw = tuple(
            line.strip()
            for line in Path(keywords).read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
    bundle = metrics.ScorerBundle(keywords=kw)
    weights = metrics.SumSimWeights(alpha=alpha, beta=beta)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(
                pool.map(lambda p: metrics.score_pair(*p, bundle, weights), pairs)
            )
        corpus_report = metrics.CorpusReport(
            reports=list(reports),
            means={
                key: sum(getattr(r, key) for r in reports) / len(reports)
                for key in ("s_r", "s_b", "s_f", "sumsim")
                if all(getattr(r, key) is not None for r in reports)
            },
            failed=0,
        )
    else:
        corpus_report = metrics.evaluate_corpus(pairs, bundle, weights)
    for row in corpus_report.breakdown_rows():
        _emit(row)
    _emit({"means": corpus_report.means, "failed": corpus_report.failed})


@cli.command("pseudo-label")
@click.option("--segments", "segments_path", required=True, type=click.Path(exists=True),
              help="text file, one segment per line")
@click.option("--questions", "questions_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--backend", default="stub", type=click.Choice(["stub", "replay", "http"]))
@click.option("--recording", default=None, type=click.Path(),
              help="JSONL of recorded completions (replay backend)")
@click.option("--base-url", default=None)
@click.option("--model-name", default=None)
@click.option("--token-env", default="CALLSUM_COMPLETION_TOKEN")
@click.option("--rpm", default=None, type=float, help="requests per minute")
@click.option("--retries", default=3, type=int)
@click.option("--jobs", default=1, type=int)
@click.option("--dry-run", is_flag=True)
def pseudo_label_cmd(segments_path, questions_path, out_path, backend,
                     recording, base_url, model_name, token_env, rpm,
                     retries, jobs, dry_run):
    """Generate pseudo-label training pairs for segments."""
    segments = [
        line.strip()
        for line in Path(segments_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    questions = pseudo_label.DEFAULT_QUESTIONS
    if questions_path:
        questions = [
            line.strip()
            for line in Path(questions_path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    templates = [pseudo_label.PromptTemplate(question=q) for q in questions]

    if dry_run:
        _emit(
            {
                "dry_run": True,
                "segments": len(segments),
                "questions": len(questions),
                "prompts": len(segments) * len(questions),
                "backend": backend,
                "out": out_path,
            }
        )
        return

    if backend == "stub":
        client = pseudo_label.StubCompletionClient()
    elif backend == "replay":
        if not recording:
            raise click.UsageError("--recording is required for the replay backend")
        client = pseudo_label.ReplayCompletionClient(recording)
    else:
        import os

        if not base_url or not model_name:
            raise click.UsageError("--base-url and --model-name are required")
        client = pseudo_label.HttpCompletionClient(
            base_url, model_name, api_token=os.environ.get(token_env)
        )

    policy = pseudo_label.LabelingPolicy(
        max_retries=retries, requests_per_minute=rpm, max_workers=jobs
    )
    result = pseudo_label.label_segments(segments, templates, client, policy)
    pseudo_label.write_pairs_jsonl(out_path, result.pairs)
    _log(f"{len(result.pairs)} pairs written, {result.dropped_empty} empty dropped")
    _emit(
        {
            "pairs": len(result.pairs),
            "dropped_empty": result.dropped_empty,
            "out": out_path,
        }
    )


@cli.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help='JSONL of {"dialogue","summary","source"}')
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--epochs", default=5, type=int)
@click.option("--lr", default=1e-3, type=float)
@click.option("--batch-size", default=16, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--hidden-dim", default=32, type=int)
@click.option("--layers", default=2, type=int)
@click.option("--no-speaker-turn", is_flag=True,
              help="train the baseline without speaker/turn tables")
@click.option("--dry-run", is_flag=True)
def train(pairs_path, out_dir, epochs, lr, batch_size, seed, hidden_dim,
          layers, no_speaker_turn, dry_run):
    """Fine-tune the toy summarizer and save a checkpoint directory."""
    records = pseudo_label.read_pairs_jsonl(pairs_path)
    if dry_run:
        _emit(
            {
                "dry_run": True,
                "pairs": len(records),
                "epochs": epochs,
                "out": out_dir,
            }
        )
        return
    pairs = [(r["dialogue"], r["summary"]) for r in records]
    texts = [d for d, _ in pairs] + [s for _, s in pairs]
    tokenizer = summarizer.WordTokenizer.build(texts)
    cfg = summarizer.DialogEncoderConfig(
        vocab_size=len(tokenizer), hidden_dim=hidden_dim
    )
    import torch

    torch.manual_seed(seed)
    model = summarizer.DialogSeq2Seq(
        cfg, num_layers=layers, use_speaker_turn=not no_speaker_turn
    )
    hyper = summarizer.TrainingConfig(
        learning_rate=lr, epochs=epochs, batch_size=batch_size, seed=seed
    )
    _, history = summarizer.fine_tune(model, tokenizer, pairs, hyper)
    summarizer.save_checkpoint(out_dir, model, tokenizer)
    _log(f"checkpoint saved to {out_dir}")
    _emit({"loss_history": history, "checkpoint": out_dir})


@cli.command("train-lm")
@click.option("--summaries", "summaries_path", required=True,
              type=click.Path(exists=True), help="text file, one summary per line")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--epochs", default=5, type=int)
@click.option("--lr", default=0.05, type=float)
@click.option("--seed", default=0, type=int)
@click.option("--holdout", default=0.1, type=float)
@click.option("--dry-run", is_flag=True)
def train_lm(summaries_path, out_path, epochs, lr, seed, holdout, dry_run):
    """Fine-tune the acceptability LM on known-good summaries."""
    lines = [
        line.strip()
        for line in Path(summaries_path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if dry_run:
        _emit({"dry_run": True, "summaries": len(lines), "out": out_path})
        return
    import torch

    split = max(1, int(len(lines) * (1 - holdout)))
    train_set, held_out = lines[:split], lines[split:] or lines[:1]
    vocab = sorted({w for line in lines for w in line.lower().split()})
    lm = acceptability.BigramLM(vocab, seed=seed)
    initial_pp = acceptability.mean_perplexity(lm, held_out)
    acceptability.fine_tune_lm(
        lm, train_set,
        acceptability.LMTrainingConfig(learning_rate=lr, epochs=epochs, seed=seed),
    )
    final_pp = acceptability.mean_perplexity(lm, held_out)
    torch.save({"vocab": vocab, "state": lm.state_dict()}, out_path)
    _log(f"LM saved to {out_path}")
    _emit({"initial_pp": initial_pp, "final_pp": final_pp, "out": out_path})


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(config_path, host, port):
    """Start the HTTP service with the shared config file."""
    import uvicorn

    from .service import create_app

    cfg, model, lm = config.load_runtime(config_path)
    uvicorn.run(create_app(cfg, model, lm), host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(0 if exc.exit_code == 0 else 1)
    except (click.UsageError, click.Abort) as exc:
        if isinstance(exc, click.UsageError):
            exc.show(file=sys.stderr)
        sys.exit(1)
    except Exception as exc:  # runtime failure
        _log(f"error: {exc}")
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
