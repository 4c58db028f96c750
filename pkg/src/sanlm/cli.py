"""Command-line interface.

Subcommands cover the full workflow: build-vocab -> train -> score ->
rescore -> evaluate / analyze-positions. Every command takes an --out
directory, writes its artifacts there along with the fully-resolved
configuration, and is deterministic given its flags and seed.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import corpus as C
from . import evaluation as E
from . import plots
from . import rescoring as R
from . import scoring as S
from .config import resolve_config, write_resolved_config
from .errors import DataError, ParameterError, SanlmError
from .model import ModelConfig
from .training import TrainConfig, load_checkpoint, train


@click.group()
def cli():
    """Self-attention LM toolkit: train, score, rescore, evaluate."""


def _parse_grid(spec: str) -> list[float]:
    """Accept '0,0.2,0.4' or 'start:stop:step'."""
    try:
        if ":" in spec:
            start, stop, step = (float(x) for x in spec.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            grid = []
            value = start
            while value <= stop + 1e-12:
                grid.append(round(value, 10))
                value += step
            return grid
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise ParameterError(f"bad grid specification {spec!r}: {exc}") from exc


def _load_model(checkpoint_path, vocab: C.Vocabulary):
    ckpt = load_checkpoint(checkpoint_path,
                           expected_vocab_hash=vocab.content_hash())
    return ckpt.model


@cli.command("build-vocab")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--size", "-k", required=True, type=int,
              help="Number of non-special tokens to keep.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_build_vocab(corpus_path, size, out_dir, config_path):
    """Build a frequency-ranked vocabulary from a one-sentence-per-line corpus."""
    resolved = resolve_config(config_path)
    lines = C.read_corpus(corpus_path)
    vocab = C.build_vocab(lines, size)
    out = Path(out_dir)
    write_resolved_config(resolved, out)
    vocab.save(out / "vocab.txt")
    click.echo(f"wrote {len(vocab)} tokens to {out / 'vocab.txt'}")


@cli.command("train")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["bi", "uni"]), required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--steps", type=int, default=None, help="Override train.max_steps.")
def cmd_train(corpus_path, vocab_path, mode, out_dir, config_path, seed, steps):
    """Train a bidirectional (masked-word) or unidirectional (next-word) LM."""
    overrides: dict = {"model": {"mode": {"bi": "bidirectional",
                                          "uni": "unidirectional"}[mode]}}
    if seed is not None:
        overrides["seed"] = seed
    if steps is not None:
        overrides["train"] = {"max_steps": steps}
    resolved = resolve_config(config_path, overrides)

    vocab = C.Vocabulary.load(vocab_path)
    lines = C.read_corpus(corpus_path)
    out = Path(out_dir)
    write_resolved_config(resolved, out)

    model_config = ModelConfig(vocab_size=len(vocab), **resolved["model"])
    t = resolved["train"]
    train_config = TrainConfig(
        model=model_config, learning_rate=t["learning_rate"],
        beta1=t["beta1"], beta2=t["beta2"], batch_size=t["batch_size"],
        max_steps=t["max_steps"], eval_interval=t["eval_interval"],
        heldout_fraction=t["heldout_fraction"], seed=resolved["seed"],
        checkpoint_dir=str(out), checkpoint_interval=t["checkpoint_interval"])
    result = train(train_config, lines, vocab, log_path=out / "metrics.log")
    if result.skipped_too_long:
        click.echo(f"skipped {result.skipped_too_long} over-length sentences")
    click.echo(f"trained {train_config.max_steps} steps; "
               f"checkpoint at {result.final_checkpoint}")


@cli.command("score")
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Sentences to score, one per line.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_score(checkpoint_path, vocab_path, input_path, out_dir, config_path):
    """Score sentences; one JSON record per line with per-word terms."""
    resolved = resolve_config(config_path)
    vocab = C.Vocabulary.load(vocab_path)
    model = _load_model(checkpoint_path, vocab)
    scorer = S.make_scorer(model, vocab)
    in_path = Path(input_path)
    if not in_path.exists():
        raise DataError(f"input file not found: {in_path}")
    out = Path(out_dir)
    write_resolved_config(resolved, out)
    with open(out / "scores.jsonl", "w", encoding="utf-8") as f:
        for line in in_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = {"text": line, **scorer(line).to_dict()}
            f.write(json.dumps(record, sort_keys=True) + "\n")
    click.echo(f"wrote {out / 'scores.jsonl'}")


@cli.command("rescore")
@click.option("--nbest", "nbest_path", required=True, type=click.Path())
@click.option("--vocab", "vocab_path", required=True, type=click.Path())
@click.option("--bi-checkpoint", type=click.Path(), default=None)
@click.option("--uni-checkpoint", type=click.Path(), default=None)
@click.option("--lambda", "lam", type=float, default=None,
              help="AM/LM interpolation weight in [0, 1].")
@click.option("--alpha", type=float, default=None,
              help="uniLM/biLM mix in [0, 1]; required with both checkpoints.")
@click.option("--grid", "grid_spec", default=None,
              help="Sweep lambda on this grid using the lists' references.")
@click.option("--threads", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_rescore(nbest_path, vocab_path, bi_checkpoint, uni_checkpoint, lam,
                alpha, grid_spec, threads, out_dir, config_path):
    """Rescore N-best lists with LM scores and write the new top-1."""
    overrides: dict = {}
    if lam is not None:
        overrides["rescore"] = {"lambda": lam}
    if alpha is not None:
        overrides.setdefault("rescore", {})["alpha"] = alpha
    if threads is not None:
        overrides["threads"] = threads
    resolved = resolve_config(config_path, overrides)

    vocab = C.Vocabulary.load(vocab_path)
    if bi_checkpoint is None and uni_checkpoint is None:
        raise ParameterError("supply --bi-checkpoint and/or --uni-checkpoint")
    bi = S.make_scorer(_load_model(bi_checkpoint, vocab), vocab) \
        if bi_checkpoint else None
    uni = S.make_scorer(_load_model(uni_checkpoint, vocab), vocab) \
        if uni_checkpoint else None
    lm_scorer = R.make_lm_scorer(uni=uni, bi=bi,
                                 alpha=resolved["rescore"]["alpha"])

    lists = R.load_nbest(nbest_path)
    out = Path(out_dir)
    write_resolved_config(resolved, out)

    n_workers = max(1, resolved["threads"])
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            all_scores = list(pool.map(
                lambda nl: R.lm_scores_for_list(nl, lm_scorer), lists))
    else:
        all_scores = [R.lm_scores_for_list(nl, lm_scorer) for nl in lists]

    chosen_lam = resolved["rescore"]["lambda"]
    if grid_spec is not None:
        grid = _parse_grid(grid_spec)
        chosen_lam, table = R.sweep_lambda(lists, all_scores, grid)
        with open(out / "lambda_sweep.csv", "w", encoding="utf-8") as f:
            f.write("lambda,wer,errors,ref_words\n")
            for row in table:
                f.write(f"{row['lambda']},{row['wer']:.6f},"
                        f"{row['errors']},{row['ref_words']}\n")
        click.echo(f"best lambda on references: {chosen_lam}")

    by_id = {}
    for nl, scores in zip(lists, all_scores):
        by_id[nl.utterance_id] = R.rescore_nbest(nl, scores, chosen_lam)
    R.save_nbest(lists, out / "rescored.jsonl", scored=by_id)
    with open(out / "top1.tsv", "w", encoding="utf-8") as f:
        for nl in sorted(lists, key=lambda x: x.utterance_id):
            f.write(f"{nl.utterance_id}\t{by_id[nl.utterance_id][0].text}\n")
    click.echo(f"wrote {out / 'rescored.jsonl'} and {out / 'top1.tsv'}")


def _read_transcript(path) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"transcript file not found: {p}")
    out = {}
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt_id, _, text = line.partition("\t")
        out[utt_id] = text
    return out


@cli.command("evaluate")
@click.option("--nbest", "nbest_path", required=True, type=click.Path(),
              help="N-best lists with references.")
@click.option("--hyp", "hyp_path", type=click.Path(), default=None,
              help="Optional rescored top-1 transcript (utt_id<TAB>text).")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_evaluate(nbest_path, hyp_path, out_dir, config_path):
    """WER report: 1-best baseline and oracle rows, plus an optional transcript."""
    resolved = resolve_config(config_path)
    lists = R.load_nbest(nbest_path)
    out = Path(out_dir)
    write_resolved_config(resolved, out)

    baseline = E.WerReport()
    oracle = E.WerReport()
    for nl in lists:
        if nl.reference is None:
            raise DataError(f"list {nl.utterance_id!r} has no reference")
        ref = C.tokenize(nl.reference)
        baseline.add(nl.utterance_id, ref, C.tokenize(nl.entries[0].text))
        best, _ = E.oracle_wer(nl)
        oracle.utterances.append(best)

    conditions = [("1-best (baseline)", baseline), ("oracle", oracle)]
    if hyp_path is not None:
        transcript = _read_transcript(hyp_path)
        rescored = E.WerReport()
        for nl in lists:
            if nl.utterance_id not in transcript:
                raise DataError(f"transcript missing {nl.utterance_id!r}")
            rescored.add(nl.utterance_id, C.tokenize(nl.reference),
                         C.tokenize(transcript[nl.utterance_id]))
        conditions.append(("rescored", rescored))
        E.emit_wer_report(rescored, out / "utterance_wer.csv")
    else:
        E.emit_wer_report(baseline, out / "utterance_wer.csv")

    with open(out / "wer_table.csv", "w", encoding="utf-8") as f:
        f.write("condition,substitutions,deletions,insertions,ref_words,"
                "wer,wer_percent\n")
        for name, report in conditions:
            f.write(f"\"{name}\",{report.substitutions},{report.deletions},"
                    f"{report.insertions},{report.ref_words},"
                    f"{report.wer:.6f},{100 * report.wer:.2f}\n")
    plots.render_wer_bars([(name, rep.wer) for name, rep in conditions],
                          out / "wer_table.png")
    for name, report in conditions:
        click.echo(f"{name}: WER {100 * report.wer:.2f}%")


@cli.command("analyze-positions")
@click.option("--nbest", "nbest_path", required=True, type=click.Path(),
              help="N-best lists with references.")
@click.option("--hyp", "hyp_specs", multiple=True, required=True,
              help="label=transcript.tsv; repeatable for several conditions.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_analyze_positions(nbest_path, hyp_specs, out_dir, config_path):
    """Histogram of misrecognized words by hypothesis position."""
    resolved = resolve_config(config_path)
    lists = R.load_nbest(nbest_path)
    out = Path(out_dir)
    write_resolved_config(resolved, out)

    hists: dict[str, E.PositionErrorHistogram] = {}
    for spec in hyp_specs:
        label, _, path = spec.partition("=")
        if not path:
            raise ParameterError(f"--hyp expects label=path, got {spec!r}")
        transcript = _read_transcript(path)
        hist = E.PositionErrorHistogram()
        for nl in lists:
            if nl.reference is None:
                raise DataError(f"list {nl.utterance_id!r} has no reference")
            if nl.utterance_id not in transcript:
                raise DataError(f"transcript missing {nl.utterance_id!r}")
            _, _, _, alignment = E.wer(C.tokenize(nl.reference),
                                       C.tokenize(transcript[nl.utterance_id]))
            hist.add_alignment(alignment)
        hists[label] = hist
        E.emit_histogram(hist, out / f"position_errors_{label}.csv")
    plots.render_position_histogram(hists, out / "position_errors.png")
    for label, hist in sorted(hists.items()):
        click.echo(f"{label}: {hist.total} position errors")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ParameterError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except SanlmError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        click.echo(f"internal error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
