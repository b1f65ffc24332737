"""Command line entry point: ``crossplat {ingest,interests,experiment,stats,synth}``."""

from __future__ import annotations

import gzip
import json
import logging
import sys
import time
from collections import Counter
from contextlib import ExitStack
from pathlib import Path

import click

from . import __version__, _backend
from .corpus import CorpusError, filter_base_users, link_accounts, parse_github_events, \
    parse_stackoverflow_posts, read_corpus, read_links, write_corpus
from .experiment import ExperimentConfig, platform_tag_usage, run_experiment, tag_usage_stats, write_tag_usage
from .interests import VocabularyError, build_vocabulary, item_interests, write_interests
from .synth import SynthSpec, SynthSpecError, generate_corpus, write_ground_truth

log = logging.getLogger("crossplat")


def _open_bytes(stack: ExitStack, path: str):
    opener = gzip.open if str(path).endswith(".gz") else open
    return stack.enter_context(opener(path, "rb"))


def _resolve_out(ctx: click.Context, out: str | None) -> Path:
    out = out or ctx.obj.get("out")
    if not out:
        raise click.UsageError("an output location is required (--out)")
    return Path(out)


def _write_manifest(path: Path, subcommand: str, config: dict, inputs: dict, outputs: list,
                    seeds, started: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "inputs": inputs,
        "outputs": [str(o) for o in outputs],
        "seeds": seeds,
        "version": __version__,
        "kernel_backend": _backend.NAME,
        "duration_s": round(time.perf_counter() - started, 3),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.option("--seed", type=int, default=None, help="Override the seed(s) of the subcommand.")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker processes for experiments.")
@click.option("--out", type=click.Path(), default=None, help="Output directory or file.")
@click.option("-v", "--verbose", is_flag=True)
@click.version_option(__version__)
@click.pass_context
def main(ctx, seed, threads, out, verbose):
    """Multi-platform activity prediction on GitHub / Stack Overflow activity."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, threads=threads, out=out)


@main.command()
@click.option("--so-posts", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--so-votes", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--gh-events", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--links", "links_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--window", nargs=2, default=None, help="Keep only activities in [START, END).")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_context
def ingest(ctx, so_posts, so_votes, gh_events, links_path, window, out):
    """Parse dumps, link accounts and write the canonical corpus files."""
    started = time.perf_counter()
    out_dir = _resolve_out(ctx, out)
    try:
        with ExitStack() as stack:
            so = parse_stackoverflow_posts(_open_bytes(stack, so_posts),
                                           _open_bytes(stack, so_votes) if so_votes else None)
            gh = parse_github_events(_open_bytes(stack, gh_events))
        with open(links_path, encoding="utf-8") as f:
            links = read_links(f)
        if not links:
            click.echo("warning: links file is empty; no user will span both platforms", err=True)
        diagnostics = Counter()
        corpus = link_accounts(links, gh, so, window=window, diagnostics=diagnostics)
    except CorpusError as exc:
        _fail(str(exc))
    diagnostics.update(so.skipped)
    diagnostics.update(gh.skipped)
    write_corpus(corpus, out_dir)
    diag = dict(sorted(diagnostics.items()))
    (out_dir / "diagnostics.json").write_text(json.dumps(diag, indent=2) + "\n", encoding="utf-8")
    for key, count in diag.items():
        click.echo(f"skipped {count} ({key})", err=True)
    click.echo(f"{len(corpus.items)} items, {len(corpus.activities)} activities, "
               f"{len(filter_base_users(corpus))} base users", err=True)
    _write_manifest(out_dir / "run_manifest.json", "ingest", {"window": window},
                    {"so_posts": so_posts, "so_votes": so_votes, "gh_events": gh_events, "links": links_path},
                    ["items.jsonl", "activities.jsonl", "links.jsonl", "corpus.json", "diagnostics.json"],
                    None, started)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def interests(ctx, corpus_dir, out):
    """Infer item interests and export them as JSON lines."""
    started = time.perf_counter()
    out_path = _resolve_out(ctx, out)
    try:
        corpus = read_corpus(corpus_dir)
        vocab = build_vocabulary(corpus)
    except (CorpusError, VocabularyError) as exc:
        _fail(str(exc))
    table = item_interests(corpus, vocab)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_interests(table, out_path)
    unmatched = sum(1 for v in table.values() if not v)
    click.echo(f"vocabulary size: {len(vocab)} tags from {vocab.built_from} questions", err=True)
    click.echo(f"{unmatched} of {len(table)} items have no matched tags", err=True)
    _write_manifest(out_path.with_name(out_path.name + ".manifest.json"), "interests", {},
                    {"corpus_dir": corpus_dir}, [out_path], None, started)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="YAML key/value experiment config; unset keys use the defaults.")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_context
def experiment(ctx, corpus_dir, config_path, out):
    """Run the temporal-split prediction experiment and write the AUC report."""
    started = time.perf_counter()
    out_dir = _resolve_out(ctx, out)
    try:
        config = ExperimentConfig.load(config_path) if config_path else ExperimentConfig()
        if ctx.obj["seed"] is not None:
            config = ExperimentConfig.from_mapping(
                {**config.to_json(), "seeds": [ctx.obj["seed"] + i for i in range(config.runs)]}
            )
        corpus = read_corpus(corpus_dir)
        report = run_experiment(corpus, config, workers=ctx.obj["threads"])
    except (CorpusError, VocabularyError, ValueError) as exc:
        _fail(str(exc))
    report.write(out_dir)
    click.echo(report.summary_table(), err=True, nl=False)
    _write_manifest(out_dir / "run_manifest.json", "experiment", config.to_json(),
                    {"corpus_dir": corpus_dir, "config": config_path},
                    ["report.jsonl", "roc.tsv", "summary.txt"], list(config.seeds), started)


@main.command()
@click.argument("corpus_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--top-k", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def stats(ctx, corpus_dir, top_k, out):
    """Most used tags per activity type and per platform."""
    started = time.perf_counter()
    try:
        corpus = read_corpus(corpus_dir)
        table = item_interests(corpus, build_vocabulary(corpus))
    except (CorpusError, VocabularyError) as exc:
        _fail(str(exc))
    usage = {**platform_tag_usage(corpus, table, top_k), **tag_usage_stats(corpus, table, top_k)}
    out = out or ctx.obj.get("out")
    if out is None:
        for group, rows in usage.items():
            click.echo(f"[{group.value}]")
            for rank, (tag, pct) in enumerate(rows, 1):
                click.echo(f"{rank:>3} {tag:<30} {pct:7.3f}%")
        return
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_tag_usage(usage, out_path)
    _write_manifest(out_path.with_name(out_path.name + ".manifest.json"), "stats", {"top_k": top_k},
                    {"corpus_dir": corpus_dir}, [out_path], None, started)


@main.command()
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_context
def synth(ctx, spec_path, out):
    """Generate a synthetic planted-topic corpus (YAML spec; defaults if omitted)."""
    import yaml

    started = time.perf_counter()
    out_dir = _resolve_out(ctx, out)
    try:
        values = {}
        if spec_path:
            with open(spec_path, encoding="utf-8") as f:
                values = yaml.safe_load(f) or {}
        if ctx.obj["seed"] is not None:
            values["seed"] = ctx.obj["seed"]
        spec = SynthSpec.from_mapping(values)
        corpus, truth = generate_corpus(spec)
    except SynthSpecError as exc:
        _fail(str(exc))
    write_corpus(corpus, out_dir)
    write_ground_truth(truth, out_dir / "ground_truth.jsonl")
    click.echo(f"{len(corpus.items)} items, {len(corpus.activities)} activities, "
               f"{len(corpus.links)} linked users", err=True)
    _write_manifest(out_dir / "run_manifest.json", "synth", spec.to_json(), {"spec": spec_path},
                    ["items.jsonl", "activities.jsonl", "links.jsonl", "corpus.json", "ground_truth.jsonl"],
                    [spec.seed], started)


if __name__ == "__main__":
    main()
