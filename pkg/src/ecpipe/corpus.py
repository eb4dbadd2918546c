"""Transcript ingestion, validation, and tokenization.

Transcripts arrive as JSONL, one object per line with fields ``id, ticker,
date, sector, quarter, fiscal_year, text``. Malformed lines are collected
into an error report instead of aborting the load; valid and invalid line
counts always sum to the file's line count.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
from dataclasses import dataclass

from .errors import FileUnreadable, UnknownSector

logger = logging.getLogger(__name__)

# Canonical sector names with their short forms and reference index symbols.
# "Not Specified" falls back to the broad-market index.
_SECTOR_TABLE = [
    ("Services", "Service", "IYC"),
    ("Technology", "Tech", "XLK"),
    ("Financial", "Fin", "XLF"),
    ("Healthcare", "Health", "XLV"),
    ("Basic Materials", "Mat", "XLB"),
    ("Consumer", "Con", "XLY"),
    ("Industrial", "Ind", "XLI"),
    ("Utilities", "Util", "XLU"),
    ("Not Specified", "Not Specified", "SP500"),
]

SECTORS = tuple(full for full, _, _ in _SECTOR_TABLE)
SECTOR_SHORT = {full: short for full, short, _ in _SECTOR_TABLE}
SECTOR_INDEX = {full: idx for full, _, idx in _SECTOR_TABLE}

_SECTOR_LOOKUP = {}
for _full, _short, _ in _SECTOR_TABLE:
    _SECTOR_LOOKUP[_full.lower()] = _full
    _SECTOR_LOOKUP[_short.lower()] = _full

# Tokens are runs of ASCII letters, optionally joined by internal
# apostrophes. Anything containing a digit is dropped.
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")
_WORD_RE = re.compile(r"[a-z]+(?:'[a-z]+)*")


@dataclass(frozen=True)
class TranscriptRecord:
    """One earnings-call document with its company metadata."""

    id: str
    ticker: str
    call_date: dt.date
    sector: str
    quarter: int
    fiscal_year: int
    text: str


@dataclass(frozen=True)
class LineError:
    """A rejected input line and the reason it was rejected."""

    lineno: int
    message: str


def normalize_sector(name: str) -> str:
    """Map a full or short sector name to its canonical form."""
    canonical = _SECTOR_LOOKUP.get(name.strip().lower())
    if canonical is None:
        raise UnknownSector(f"unknown sector {name!r}")
    return canonical


def reference_index(sector: str) -> str:
    """Reference index symbol for a sector (total over the 9 sectors)."""
    return SECTOR_INDEX[normalize_sector(sector)]


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word tokens.

    Splits on non-alphanumeric boundaries, keeps purely alphabetic tokens
    (internal apostrophes allowed), and drops anything containing a digit.
    Deterministic; empty input yields an empty stream.
    """
    tokens = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if _WORD_RE.fullmatch(tok):
            tokens.append(tok)
    return tokens


def _parse_line(obj: dict) -> TranscriptRecord:
    missing = [f for f in ("id", "ticker", "date", "sector", "quarter", "fiscal_year", "text") if f not in obj]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    try:
        call_date = dt.date.fromisoformat(str(obj["date"]))
    except ValueError as exc:
        raise ValueError(f"bad date {obj['date']!r}: {exc}") from exc
    sector = normalize_sector(str(obj["sector"]))
    quarter = obj["quarter"]
    if not isinstance(quarter, int) or quarter not in (1, 2, 3, 4):
        raise ValueError(f"quarter must be 1..4, got {quarter!r}")
    fiscal_year = obj["fiscal_year"]
    if not isinstance(fiscal_year, int):
        raise ValueError(f"fiscal_year must be an integer, got {fiscal_year!r}")
    text = str(obj["text"])
    if not text.strip():
        raise ValueError("text is empty")
    return TranscriptRecord(
        id=str(obj["id"]),
        ticker=str(obj["ticker"]),
        call_date=call_date,
        sector=sector,
        quarter=quarter,
        fiscal_year=fiscal_year,
        text=text,
    )


def load_transcripts(path) -> tuple[list[TranscriptRecord], list[LineError]]:
    """Load and validate a JSONL transcript file.

    Returns the valid records plus a per-line error report. A duplicate
    (ticker, call date) pair rejects the later line: the data model allows
    one call per company per day.
    """
    records: list[TranscriptRecord] = []
    report: list[LineError] = []
    seen_ids: set[str] = set()
    seen_calls: set[tuple[str, dt.date]] = set()
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc

    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            report.append(LineError(lineno, "blank line"))
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("line is not a JSON object")
            record = _parse_line(obj)
        except (ValueError, UnknownSector) as exc:
            report.append(LineError(lineno, str(exc)))
            continue
        if record.id in seen_ids:
            report.append(LineError(lineno, f"duplicate id {record.id!r}"))
            continue
        key = (record.ticker, record.call_date)
        if key in seen_calls:
            report.append(LineError(lineno, f"duplicate call {record.ticker} on {record.call_date}"))
            continue
        seen_ids.add(record.id)
        seen_calls.add(key)
        records.append(record)

    if report:
        logger.warning("%s: rejected %d of %d lines", path, len(report), len(lines))
    return records, report
