"""Assembles regression-ready rows and the two standard model grids.

One row per labeled transcript: the binary label, per-category sentiment
scores, sector and year fixed effects, the prior-month and post-call
majority-recommendation variables (None when no recommendation falls in
the window, which drops the row from models that include the variable),
and sales/EPS fundamentals where joinable.
"""

from __future__ import annotations

import logging

from .econometrics import ModelSpec, incremental_grid
from .harness import ExclusionReport, Inputs, LabelSpec, assemble_dataset, join_fundamentals
from .recommendations import MISSING as MAR_MISSING
from .recommendations import POST_5D, PRIOR_1M, RecommendationRecord, compute_mar
from .sentiment import score

logger = logging.getLogger(__name__)

SENTIMENT_SIX = ("positive", "negative", "anxiety", "anger", "sad", "certain")
SENTIMENT_EXTRA = ("cognitive", "insight", "causation", "discrepancy")
FUNDAMENTALS = ("actual_sales", "estimated_sales", "actual_eps", "estimated_eps")


def build_regression_rows(
    inputs: Inputs,
    label_spec: LabelSpec,
    recommendations: list[RecommendationRecord] | None = None,
) -> tuple[list[dict], ExclusionReport]:
    """Row dicts keyed the way the model grids expect."""
    if inputs.lexicon is None:
        raise ValueError("a lexicon is required to build regression rows")
    examples, report = assemble_dataset(inputs.records, inputs.prices, inputs.indices,
                                        label_spec)
    records = inputs.record_by_id()
    recommendations = recommendations or []
    rows = []
    for ex in examples:
        record = records[ex.transcript_id]
        row: dict = {
            "transcript_id": ex.transcript_id,
            "label": ex.label,
            "sector": record.sector,
            "year": str(record.call_date.year),
        }
        scores = score(inputs.tokens(record), inputs.lexicon)
        for name, value in scores.scores.items():
            row[name] = value
        for window, key in ((PRIOR_1M, "mar_1m"), (POST_5D, "mar_5d")):
            mar = compute_mar(recommendations, record.ticker, record.call_date, window)
            row[key] = None if mar == MAR_MISSING else mar
        fundamentals = join_fundamentals(record, inputs.fundamentals)
        for name in FUNDAMENTALS:
            row[name] = None if fundamentals is None else getattr(fundamentals, name)
        rows.append(row)
    return rows, report


def mar_grid(dependent: str = "label") -> list[ModelSpec]:
    """Six sentiment variables, then incrementally the prior-month
    recommendation, sector, year, and post-call recommendation."""
    return incremental_grid(dependent, [
        ("model 1", list(SENTIMENT_SIX), []),
        ("model 2", [], ["mar_1m"]),
        ("model 3", [], ["sector"]),
        ("model 4", [], ["year"]),
        ("model 5", [], ["mar_5d"]),
    ])


def sentiment_grid(dependent: str = "label") -> list[ModelSpec]:
    """Sector and year fixed effects throughout; sentiment blocks enter in
    stages and the final model adds the sales/EPS fundamentals."""
    return incremental_grid(dependent, [
        ("model 1", [], ["sector", "year"]),
        ("model 2", ["positive", "negative"], []),
        ("model 3", ["anxiety", "anger", "sad", "certain"], []),
        ("model 4", list(SENTIMENT_EXTRA), []),
        ("model 5", list(FUNDAMENTALS), []),
    ])


GRIDS = {"mar": mar_grid, "sentiment": sentiment_grid}
