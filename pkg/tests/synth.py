"""Synthetic corpus generators shared across the test suite.

The planted corpus carries a recoverable signal: label-1 documents use one
marker vocabulary, label-0 documents another, and each ticker's price
series is crafted so the assembled label equals the planted one (a 6% move
in the planted direction, clearing both the value and shock rules).
"""

import datetime as dt
import json

import numpy as np

from ecpipe.corpus import TranscriptRecord
from ecpipe.labels import PriceSeries

FILLER = (
    "the quarter results were discussed by management and analysts during the "
    "call with commentary on revenue margins operations guidance outlook and "
    "capital allocation across regions segments and product lines overall"
).split()

# label-independent words spanning the demo lexicon's categories, so every
# sentiment score column varies across documents
FLAVOR = (
    "worried concerned uncertain frustrated angry blame regret unfortunately "
    "gloomy certainly always definitely think expect consider believe realize "
    "recognize aware because result driven due should would hope need happy "
    "pleased good weak risk"
).split()

MARKERS_UP = ["surge", "record", "beat", "momentum", "upside"]
MARKERS_DOWN = ["slump", "shortfall", "miss", "drag", "downside"]

SECTOR_CYCLE = ["Technology", "Financial", "Healthcare", "Basic Materials", "Services"]


def _weekday(d: dt.date) -> dt.date:
    while d.weekday() >= 5:
        d += dt.timedelta(days=1)
    return d


def _label_series(ticker, call_date, label, kind):
    """Price rows that make the assembled label equal the planted one.

    For daily labels a 6% move in the planted direction clears both the
    value rule and the 5% shock threshold. For the index kind the stock
    moves 1% per day in the planted direction over the five post-event
    weekdays while the reference index stays flat, so all five comparison
    days agree.
    """
    if kind in ("value", "shock"):
        move = 1.06 if label == 1 else 0.94
        return PriceSeries(
            symbol=ticker,
            dates=(call_date - dt.timedelta(days=1), call_date + dt.timedelta(days=1)),
            closes=(100.0, round(100.0 * move, 4)),
        )
    step = 1.01 if label == 1 else 0.99
    dates = [call_date - dt.timedelta(days=1)]
    day = call_date + dt.timedelta(days=1)
    while len(dates) < 6:
        if day.weekday() < 5:
            dates.append(day)
        day += dt.timedelta(days=1)
    closes = [round(100.0 * step ** i, 6) for i in range(6)]
    return PriceSeries(symbol=ticker, dates=tuple(dates), closes=tuple(closes))


def flat_index_series(symbol, start, end):
    """Constant-value weekday series covering [start, end]."""
    dates = []
    day = start
    while day <= end:
        if day.weekday() < 5:
            dates.append(day)
        day += dt.timedelta(days=1)
    return PriceSeries(symbol=symbol, dates=tuple(dates),
                       closes=tuple([100.0] * len(dates)))


def planted_corpus(
    n_docs: int,
    seed: int = 0,
    train_years=(2016, 2017, 2018),
    test_year=2019,
    test_fraction=0.25,
    sectors=("Technology",),
    n_markers=6,
    marker_flip=0.0,
    shuffle_labels=False,
    label_kind="value",
):
    """Records plus aligned prices; returns (records, prices, labels)."""
    rng = np.random.default_rng(seed)
    records, prices, labels = [], {}, {}
    n_test = int(round(n_docs * test_fraction))
    for i in range(n_docs):
        label = int(rng.integers(0, 2))
        is_test = i >= n_docs - n_test
        year = test_year if is_test else train_years[i % len(train_years)]
        month = 2 + (i % 4) * 3
        call_date = _weekday(dt.date(year, month, 3 + int(rng.integers(0, 18))))
        ticker = f"T{i:04d}"
        sector = sectors[i % len(sectors)]

        body = [FILLER[int(rng.integers(len(FILLER)))] for _ in range(24)]
        body += [FLAVOR[int(rng.integers(len(FLAVOR)))] for _ in range(6)]
        for _ in range(n_markers):
            direction = label if rng.random() >= marker_flip else 1 - label
            markers = MARKERS_UP if direction == 1 else MARKERS_DOWN
            body.append(markers[int(rng.integers(len(markers)))])
        order = rng.permutation(len(body))
        text = " ".join(body[j] for j in order)

        records.append(TranscriptRecord(
            id=f"d{i:04d}", ticker=ticker, call_date=call_date, sector=sector,
            quarter=1 + (call_date.month - 1) // 3, fiscal_year=year, text=text,
        ))
        prices[ticker] = _label_series(ticker, call_date, label, label_kind)
        labels[f"d{i:04d}"] = label

    if shuffle_labels:
        # break the text-label link but keep the label marginals: reassign
        # prices by a permuted copy of the labels
        ids = [r.id for r in records]
        shuffled = rng.permutation([labels[i] for i in ids])
        for record, new_label in zip(records, shuffled):
            prices[record.ticker] = _label_series(record.ticker, record.call_date,
                                                  int(new_label), label_kind)
            labels[record.id] = int(new_label)
    return records, prices, labels


def index_table_for(records, sectors):
    """Flat reference-index series spanning every call window per sector."""
    from ecpipe.corpus import reference_index

    lo = min(r.call_date for r in records) - dt.timedelta(days=10)
    hi = max(r.call_date for r in records) + dt.timedelta(days=15)
    return {reference_index(s): flat_index_series(reference_index(s), lo, hi)
            for s in set(sectors)}


def fundamentals_for(records, labels, seed=0, signal=0.3, noise=0.05):
    """Sales/EPS rows whose surprise direction tracks the label.

    With noise well below the signal the surprise sign equals the label
    almost surely (good for classifier recovery tests); noise above the
    signal keeps the classes overlapping (safe for logistic fits).
    """
    from ecpipe.harness import FundamentalsRecord

    rng = np.random.default_rng(seed)
    rows = []
    for record in records:
        direction = 1.0 if labels[record.id] == 1 else -1.0
        est_sales = float(rng.uniform(50, 500))
        est_eps = float(rng.uniform(0.5, 5.0))
        factor = 1.0 + direction * signal + float(rng.normal(0, noise))
        rows.append(FundamentalsRecord(
            ticker=record.ticker, date=record.call_date,
            actual_sales=round(est_sales * factor, 4),
            estimated_sales=round(est_sales, 4),
            actual_eps=round(est_eps * factor, 4),
            estimated_eps=round(est_eps, 4),
        ))
    return rows


def write_inputs(tmp_path, records, prices, fundamentals=None, recommendations=None):
    """Write JSONL/CSV input files; returns the paths dict for a config."""
    transcripts = tmp_path / "transcripts.jsonl"
    with open(transcripts, "w") as fh:
        for r in records:
            fh.write(json.dumps({
                "id": r.id, "ticker": r.ticker, "date": r.call_date.isoformat(),
                "sector": r.sector, "quarter": r.quarter,
                "fiscal_year": r.fiscal_year, "text": r.text,
            }) + "\n")
    prices_path = tmp_path / "prices.csv"
    with open(prices_path, "w") as fh:
        fh.write("symbol,date,close\n")
        for series in prices.values():
            for d, c in zip(series.dates, series.closes):
                fh.write(f"{series.symbol},{d.isoformat()},{c}\n")
    spec = {"transcripts": str(transcripts), "prices": str(prices_path),
            "lexicon": "demo"}
    if fundamentals is not None:
        fpath = tmp_path / "fundamentals.csv"
        with open(fpath, "w") as fh:
            fh.write("ticker,date,actual_sales,estimated_sales,actual_eps,estimated_eps\n")
            for f in fundamentals:
                fh.write(f"{f.ticker},{f.date.isoformat()},{f.actual_sales},"
                         f"{f.estimated_sales},{f.actual_eps},{f.estimated_eps}\n")
        spec["fundamentals"] = str(fpath)
    if recommendations is not None:
        rpath = tmp_path / "recommendations.csv"
        with open(rpath, "w") as fh:
            fh.write("ticker,date,rating\n")
            for rec in recommendations:
                fh.write(f"{rec.ticker},{rec.date.isoformat()},{rec.rating}\n")
        spec["recommendations"] = str(rpath)
    return spec
