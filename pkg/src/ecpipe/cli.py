"""Command-line entry points.

Every command reads file-based inputs, writes CSV (and aligned-text)
artifacts under --out-dir, and exits 0 on success, 2 on validation errors,
and 3 on data errors. Experiment outputs are content-addressed by a hash
of the resolved config and the input file digests, so re-running an
unchanged experiment reuses its directory.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import defaults
from .corpus import load_transcripts, tokenize
from .docembed import PvdmConfig, build_vocab, save_embeddings, train_pvdm
from .errors import DataError, EcpipeError, ValidationError
from .harness import (
    ExperimentConfig,
    Inputs,
    LabelSpec,
    assemble_dataset,
    load_fundamentals_csv,
    run_experiment,
)
from .labels import load_price_csv
from .recommendations import load_recommendations_csv
from .regressions import GRIDS, build_regression_rows
from .reports import (
    plot_beat_miss,
    plot_distribution,
    plot_sentiment_by_year,
    report_beat_miss,
    report_distributions,
    report_sentiment_by_year,
)
from .sentiment import load_demo_lexicon, load_lexicon, score
from .textgraph import build_text_graph
from .util import content_key, file_digest

logger = logging.getLogger(__name__)


def cli_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"validation error: {exc}", err=True)
            sys.exit(2)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(3)
        except EcpipeError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc


def _load_inputs(spec: dict, base: Path) -> tuple[Inputs, dict[str, str]]:
    """Load the input files a config names; returns data plus digests."""

    def resolve(name):
        p = Path(spec[name])
        return p if p.is_absolute() else base / p

    if "transcripts" not in spec:
        raise ValidationError("config inputs must name a transcripts file")
    digests = {}
    records, errors = load_transcripts(resolve("transcripts"))
    digests["transcripts"] = file_digest(resolve("transcripts"))
    if not records:
        raise DataError("no valid transcripts in input")
    if errors:
        logger.warning("%d transcript lines rejected", len(errors))
    inputs = Inputs(records=records)
    if "prices" in spec:
        inputs.prices = load_price_csv(resolve("prices"))
        digests["prices"] = file_digest(resolve("prices"))
    if "indices" in spec:
        inputs.indices = load_price_csv(resolve("indices"))
        digests["indices"] = file_digest(resolve("indices"))
    if "lexicon" in spec:
        if spec["lexicon"] == "demo":
            inputs.lexicon = load_demo_lexicon()
            digests["lexicon"] = "demo"
        else:
            inputs.lexicon = load_lexicon(resolve("lexicon"))
            digests["lexicon"] = file_digest(resolve("lexicon"))
    if "fundamentals" in spec:
        inputs.fundamentals = load_fundamentals_csv(resolve("fundamentals"))
        digests["fundamentals"] = file_digest(resolve("fundamentals"))
    recommendations = []
    if "recommendations" in spec:
        recommendations = load_recommendations_csv(resolve("recommendations"))
        digests["recommendations"] = file_digest(resolve("recommendations"))
    inputs.recommendations = recommendations
    return inputs, digests


def _label_spec(kind: str, tau: float, k: int) -> LabelSpec:
    return LabelSpec(kind=kind, tau=tau, k=k)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
def main(verbose):
    """Earnings-call pipeline: labels, sentiment, embeddings, classifiers."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--transcripts", required=True, type=click.Path(exists=False))
@click.option("--out-dir", default=None, type=click.Path())
@cli_errors
def ingest(transcripts, out_dir):
    """Validate a transcript JSONL file and report rejected lines."""
    records, errors = load_transcripts(transcripts)
    click.echo(f"valid records: {len(records)}")
    click.echo(f"rejected lines: {len(errors)}")
    for err in errors[:20]:
        click.echo(f"  line {err.lineno}: {err.message}")
    if out_dir:
        out = _out_dir(out_dir)
        with open(out / "ingest_errors.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lineno", "message"])
            for err in errors:
                writer.writerow([err.lineno, err.message])
    if not records:
        raise DataError("no valid transcripts in input")


@main.command("label")
@click.option("--transcripts", required=True, type=click.Path())
@click.option("--prices", required=True, type=click.Path())
@click.option("--indices", default=None, type=click.Path())
@click.option("--label-kind", type=click.Choice(["value", "shock", "index"]), default="value")
@click.option("--tau", default=defaults.SBL_TAU, show_default=True)
@click.option("--k", default=5, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def label_cmd(transcripts, prices, indices, label_kind, tau, k, out_dir):
    """Compute price-movement labels for every transcript."""
    records, _ = load_transcripts(transcripts)
    if not records:
        raise DataError("no valid transcripts in input")
    price_table = load_price_csv(prices)
    index_table = load_price_csv(indices) if indices else {}
    if label_kind == "index" and not index_table:
        raise ValidationError("index labels require --indices")
    examples, report = assemble_dataset(records, price_table, index_table,
                                        _label_spec(label_kind, tau, k))
    out = _out_dir(out_dir)
    with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["transcript_id", "label_kind", "label"])
        for ex in examples:
            writer.writerow([ex.transcript_id, ex.label_kind, ex.label])
    with open(out / "exclusions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["transcript_id", "reason"])
        for transcript_id, reason in report.excluded:
            writer.writerow([transcript_id, reason])
    click.echo(f"labeled: {len(examples)}  excluded: {len(report.excluded)}")
    for reason, count in sorted(report.reasons.items()):
        click.echo(f"  {reason}: {count}")


@main.command("sentiment")
@click.option("--transcripts", required=True, type=click.Path())
@click.option("--lexicon", default="demo", show_default=True,
              help="Lexicon file path, or 'demo' for the bundled one.")
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def sentiment_cmd(transcripts, lexicon, out_dir):
    """Score every transcript against a category lexicon."""
    records, _ = load_transcripts(transcripts)
    if not records:
        raise DataError("no valid transcripts in input")
    lex = load_demo_lexicon() if lexicon == "demo" else load_lexicon(lexicon)
    out = _out_dir(out_dir)
    names = lex.names()
    with open(out / "sentiment.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["transcript_id", "token_count", *names])
        for record in records:
            s = score(tokenize(record.text), lex)
            writer.writerow([record.id, s.token_count, *(repr(s[c]) for c in names)])
    click.echo(f"scored {len(records)} transcripts over {len(names)} categories")


@main.command("embed")
@click.option("--transcripts", required=True, type=click.Path())
@click.option("--dim", default=100, show_default=True)
@click.option("--epochs", default=10, show_default=True)
@click.option("--window", default=defaults.DOCEMBED_WINDOW, show_default=True)
@click.option("--negatives", default=defaults.DOCEMBED_NEGATIVES, show_default=True)
@click.option("--min-count", default=defaults.DOCEMBED_MIN_COUNT, show_default=True)
@click.option("--lr", default=defaults.DOCEMBED_LR, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def embed_cmd(transcripts, dim, epochs, window, negatives, min_count, lr, seed, out_dir):
    """Train document vectors over a transcript file and store them."""
    records, _ = load_transcripts(transcripts)
    if not records:
        raise DataError("no valid transcripts in input")
    corpus = [(r.id, tokenize(r.text)) for r in records]
    vocab = build_vocab([t for _, t in corpus], min_count)
    config = PvdmConfig(dim=dim, lr=lr, negatives=negatives, window=window,
                        epochs=epochs, seed=seed)
    model = train_pvdm(corpus, vocab, config)
    out = _out_dir(out_dir)
    save_embeddings(model, out / f"embeddings_d{dim}.json")
    click.echo(f"trained {len(corpus)} documents, vocabulary {len(vocab)}, "
               f"final loss {model.loss_curve[-1]:.4f}")


@main.command("graph")
@click.option("--transcripts", required=True, type=click.Path())
@click.option("--window", default=defaults.GRAPH_WINDOW, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def graph_cmd(transcripts, window, out_dir):
    """Build graphs-of-words and write per-document statistics."""
    records, _ = load_transcripts(transcripts)
    if not records:
        raise DataError("no valid transcripts in input")
    out = _out_dir(out_dir)
    with open(out / "graphs.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["transcript_id", "tokens", "nodes", "edges"])
        for record in records:
            tokens = tokenize(record.text)
            if not tokens:
                writer.writerow([record.id, 0, 0, 0])
                continue
            g = build_text_graph(tokens, window)
            writer.writerow([record.id, len(tokens), g.num_nodes, g.edge_count()])
    click.echo(f"graphed {len(records)} transcripts at window {window}")


def _run_configured_experiment(config_path, out_dir, seed_override=None,
                               save_checkpoints=False):
    raw = _load_config_file(config_path)
    if "experiment" not in raw or "inputs" not in raw:
        raise ValidationError("config must have 'inputs' and 'experiment' sections")
    experiment = ExperimentConfig.from_dict(raw["experiment"])
    if seed_override is not None:
        experiment.seeds = (seed_override,)
    if save_checkpoints:
        experiment.save_checkpoints = True
    inputs, digests = _load_inputs(raw["inputs"], Path(config_path).parent)

    key = content_key(experiment.to_dict(), digests)
    slot = _out_dir(out_dir) / key
    result_csv = slot / "result.csv"
    if result_csv.exists():
        click.echo(f"cached: {slot}")
        click.echo((slot / "result.txt").read_text())
        return
    slot.mkdir(parents=True, exist_ok=True)
    checkpoint_dir = None
    if experiment.save_checkpoints:
        checkpoint_dir = slot / "checkpoints"
        checkpoint_dir.mkdir(exist_ok=True)

    table = run_experiment(experiment, inputs, checkpoint_dir=checkpoint_dir)
    table.write_csv(result_csv)
    text = table.render_text()
    (slot / "result.txt").write_text(text)
    with open(slot / "config.json", "w", encoding="utf-8") as fh:
        json.dump(experiment.to_dict(), fh, sort_keys=True, indent=2)
    with open(slot / "inputs.json", "w", encoding="utf-8") as fh:
        json.dump(digests, fh, sort_keys=True, indent=2)
    click.echo(f"results in {slot}")
    click.echo(text)


@main.command("train")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", default=None, type=int,
              help="Train a single seed (defaults to the config's first).")
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def train_cmd(config_path, seed, out_dir):
    """Fit the configured method once per sector and save checkpoints."""
    raw = _load_config_file(config_path)
    if "experiment" not in raw:
        raise ValidationError("config must have an 'experiment' section")
    first_seed = seed
    if first_seed is None:
        seeds = raw["experiment"].get("seeds") or [0]
        first_seed = int(seeds[0])
    _run_configured_experiment(config_path, out_dir, seed_override=first_seed,
                               save_checkpoints=True)


@main.command("evaluate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def evaluate_cmd(config_path, out_dir):
    """Run the full repeated-seeds experiment from a config file."""
    _run_configured_experiment(config_path, out_dir)


@main.command("regress")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def regress_cmd(config_path, out_dir):
    """Fit a nested logistic-regression grid and emit its tables."""
    from .econometrics import render_grid_text, run_model_grid, write_grid_csv

    raw = _load_config_file(config_path)
    if "inputs" not in raw or "regression" not in raw:
        raise ValidationError("config must have 'inputs' and 'regression' sections")
    reg = raw["regression"]
    grid_name = reg.get("grid", "mar")
    if grid_name not in GRIDS:
        raise ValidationError(f"grid must be one of {sorted(GRIDS)}, got {grid_name!r}")
    label = LabelSpec(**reg.get("label", {"kind": "value"}))
    inputs, digests = _load_inputs(raw["inputs"], Path(config_path).parent)
    if inputs.lexicon is None:
        raise ValidationError("regressions need a lexicon input")

    rows, exclusions = build_regression_rows(inputs, label, inputs.recommendations)
    reports = run_model_grid(rows, GRIDS[grid_name]())
    key = content_key({"regression": reg, "label": label.to_dict()}, digests)
    slot = _out_dir(out_dir) / key
    slot.mkdir(parents=True, exist_ok=True)
    write_grid_csv(reports, slot / "grid.csv")
    text = render_grid_text(reports)
    (slot / "grid.txt").write_text(text)
    with open(slot / "exclusions.json", "w", encoding="utf-8") as fh:
        json.dump(exclusions.reasons, fh, sort_keys=True, indent=2)
    click.echo(f"results in {slot}")
    click.echo(text)


@main.group()
def report():
    """Descriptive tables and plots."""


def _report_inputs(config_path):
    raw = _load_config_file(config_path)
    if "inputs" not in raw:
        raise ValidationError("config must have an 'inputs' section")
    label_raw = raw.get("regression", {}).get("label") or raw.get("label") \
        or {"kind": "value"}
    inputs, _ = _load_inputs(raw["inputs"], Path(config_path).parent)
    examples, _ = assemble_dataset(inputs.records, inputs.prices, inputs.indices,
                                   LabelSpec(**label_raw))
    return inputs, examples


@report.command("distributions")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--group-by", type=click.Choice(["year", "quarter", "sector"]),
              default="year", show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def report_distributions_cmd(config_path, group_by, out_dir):
    """Label counts and class fractions per year, quarter, or sector."""
    inputs, examples = _report_inputs(config_path)
    table = report_distributions(examples, inputs.record_by_id(), group_by)
    out = _out_dir(out_dir)
    table.write_csv(out / f"distribution_{group_by}.csv")
    plot_distribution(table, out / f"distribution_{group_by}.png",
                      title=f"label fractions by {group_by}")
    click.echo(f"wrote distribution_{group_by}.csv ({len(table.rows)} groups)")


@report.command("sentiment-by-year")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def report_sentiment_cmd(config_path, out_dir):
    """Mean sentiment score per year and label."""
    inputs, examples = _report_inputs(config_path)
    if inputs.lexicon is None:
        raise ValidationError("this report needs a lexicon input")
    records = inputs.record_by_id()
    scores_by_id = {
        ex.transcript_id: score(inputs.tokens(records[ex.transcript_id]),
                                inputs.lexicon).scores
        for ex in examples
    }
    table = report_sentiment_by_year(examples, records, scores_by_id)
    out = _out_dir(out_dir)
    table.write_csv(out / "sentiment_by_year.csv")
    plot_sentiment_by_year(table, out / "sentiment_by_year.png")
    click.echo(f"wrote sentiment_by_year.csv ({len(table.rows)} rows)")


@report.command("beat-miss")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out-dir", required=True, type=click.Path())
@cli_errors
def report_beat_miss_cmd(config_path, out_dir):
    """Sales and EPS surprise factors paired with labels."""
    inputs, examples = _report_inputs(config_path)
    if not inputs.fundamentals:
        raise ValidationError("this report needs a fundamentals input")
    table, flagged = report_beat_miss(examples, inputs.record_by_id(),
                                      inputs.fundamentals)
    out = _out_dir(out_dir)
    table.write_csv(out / "beat_miss.csv")
    plot_beat_miss(table, out / "beat_miss.png")
    click.echo(f"wrote beat_miss.csv ({len(table.rows)} rows, {flagged} flagged)")


if __name__ == "__main__":
    main()
