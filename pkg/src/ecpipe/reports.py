"""Descriptive report tables and static plots.

Every report writes a CSV (the primary artifact, byte-stable across runs)
and optionally a PNG rendering. Plots are conveniences; tables are the
interface.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

from .corpus import TranscriptRecord
from .harness import FundamentalsRecord, join_fundamentals
from .labels import LabeledExample
from .sentiment import Lexicon, score

logger = logging.getLogger(__name__)

GROUP_FIELDS = ("year", "quarter", "sector")


def _group_value(record: TranscriptRecord, group_by: str):
    if group_by == "year":
        return record.call_date.year
    if group_by == "quarter":
        return record.quarter
    if group_by == "sector":
        return record.sector
    raise ValueError(f"group_by must be one of {GROUP_FIELDS}, got {group_by!r}")


@dataclass
class TableReport:
    header: list[str]
    rows: list[list]

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header)
            for row in self.rows:
                writer.writerow(row)


def report_distributions(
    examples: list[LabeledExample],
    records: dict[str, TranscriptRecord],
    group_by: str,
) -> TableReport:
    """Counts and class fractions per group; empty groups are omitted."""
    groups: dict[object, list[int]] = {}
    for ex in examples:
        key = _group_value(records[ex.transcript_id], group_by)
        groups.setdefault(key, []).append(ex.label)
    rows = []
    for key in sorted(groups, key=str):
        labels = groups[key]
        n = len(labels)
        ones = sum(labels)
        rows.append([key, n, repr((n - ones) / n), repr(ones / n)])
    return TableReport(header=[group_by, "count", "fraction_0", "fraction_1"], rows=rows)


def report_sentiment_by_year(
    examples: list[LabeledExample],
    records: dict[str, TranscriptRecord],
    scores_by_id: dict[str, dict[str, float]],
) -> TableReport:
    """Mean category score per (year, label)."""
    if not scores_by_id:
        return TableReport(header=["year", "label"], rows=[])
    categories = sorted(next(iter(scores_by_id.values())))
    sums: dict[tuple[int, int], list[float]] = {}
    counts: dict[tuple[int, int], int] = {}
    for ex in examples:
        if ex.transcript_id not in scores_by_id:
            continue
        key = (records[ex.transcript_id].call_date.year, ex.label)
        s = scores_by_id[ex.transcript_id]
        if key not in sums:
            sums[key] = [0.0] * len(categories)
            counts[key] = 0
        for i, c in enumerate(categories):
            sums[key][i] += s[c]
        counts[key] += 1
    rows = []
    for key in sorted(sums):
        year, label = key
        means = [repr(v / counts[key]) for v in sums[key]]
        rows.append([year, label, counts[key], *means])
    return TableReport(header=["year", "label", "count", *categories], rows=rows)


def score_all(
    records: list[TranscriptRecord],
    lexicon: Lexicon,
    tokenizer,
) -> dict[str, dict[str, float]]:
    return {r.id: score(tokenizer(r), lexicon).scores for r in records}


def report_beat_miss(
    examples: list[LabeledExample],
    records: dict[str, TranscriptRecord],
    fundamentals: list[FundamentalsRecord],
    eps_floor: float = 1e-9,
) -> tuple[TableReport, int]:
    """Relative surprise per call: (actual - estimated) / |estimated|.

    A factor of 0.5 means the actual value beat the estimate by 50%. Rows
    whose estimate is below the floor in magnitude are excluded and
    counted, since the ratio is undefined there.
    """
    rows = []
    flagged = 0
    for ex in examples:
        record = records[ex.transcript_id]
        f = join_fundamentals(record, fundamentals)
        if f is None:
            continue
        if abs(f.estimated_sales) < eps_floor or abs(f.estimated_eps) < eps_floor:
            flagged += 1
            continue
        sales_factor = (f.actual_sales - f.estimated_sales) / abs(f.estimated_sales)
        eps_factor = (f.actual_eps - f.estimated_eps) / abs(f.estimated_eps)
        rows.append([
            ex.transcript_id, record.call_date.isoformat(),
            repr(sales_factor), repr(eps_factor), ex.label,
        ])
    if flagged:
        logger.info("beat/miss report: excluded %d rows with near-zero estimates", flagged)
    return (
        TableReport(header=["transcript_id", "date", "sales_factor", "eps_factor", "label"],
                    rows=rows),
        flagged,
    )


# --- plotting ----------------------------------------------------------------


def plot_distribution(report: TableReport, path, title: str = ""):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    keys = [str(r[0]) for r in report.rows]
    frac0 = [float(r[2]) for r in report.rows]
    frac1 = [float(r[3]) for r in report.rows]
    fig, ax = plt.subplots(figsize=(7, 4))
    x = range(len(keys))
    ax.bar([i - 0.2 for i in x], frac0, width=0.4, label="label 0")
    ax.bar([i + 0.2 for i in x], frac1, width=0.4, label="label 1")
    ax.set_xticks(list(x))
    ax.set_xticklabels(keys, rotation=30, ha="right")
    ax.set_ylabel("fraction")
    ax.set_title(title or report.header[0])
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sentiment_by_year(report: TableReport, path, categories=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    all_categories = report.header[3:]
    categories = categories or all_categories[:4]
    fig, axes = plt.subplots(1, len(categories), figsize=(4 * len(categories), 3.2),
                             squeeze=False)
    for ax, cat in zip(axes[0], categories):
        col = 3 + all_categories.index(cat)
        for label in (0, 1):
            pts = [(r[0], float(r[col])) for r in report.rows if r[1] == label]
            if pts:
                xs, ys = zip(*sorted(pts))
                ax.plot(xs, ys, marker="o", label=f"label {label}")
        ax.set_title(cat)
        ax.set_xlabel("year")
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_beat_miss(report: TableReport, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
    for ax, col, name in ((axes[0], 2, "sales"), (axes[1], 3, "eps")):
        for label, color in ((1, "tab:green"), (0, "tab:red")):
            xs = [i for i, r in enumerate(report.rows) if r[4] == label]
            ys = [float(report.rows[i][col]) for i in xs]
            ax.scatter(xs, ys, s=12, color=color, label=f"label {label}")
        ax.axhline(0.0, color="black", linewidth=0.6)
        ax.set_ylabel(f"{name} surprise")
        ax.legend(fontsize=7)
    axes[1].set_xlabel("call (ordered)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
