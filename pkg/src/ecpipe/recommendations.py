"""Majority analyst-recommendation variables around an earnings call.

Two windows matter: the calendar month before the call (prior window, both
endpoints exclusive) and the five calendar days after it (exclusive start,
inclusive end). The variable takes the plurality rating inside the window;
ties break toward the rating with the most recent record unless the caller
asks for ties to be treated as missing.
"""

from __future__ import annotations

import calendar
import csv
import datetime as dt
from dataclasses import dataclass

from .errors import FileUnreadable, ValidationError

RATINGS = ("strong_buy", "moderate_buy", "hold", "moderate_sell", "strong_sell")

MISSING = "missing"

PRIOR_1M = "prior_1m"
POST_5D = "post_5d"


@dataclass(frozen=True)
class RecommendationRecord:
    ticker: str
    date: dt.date
    rating: str

    def __post_init__(self):
        if self.rating not in RATINGS:
            raise ValidationError(f"unknown rating {self.rating!r}")


def normalize_rating(raw: str) -> str:
    rating = raw.strip().lower().replace(" ", "_")
    if rating not in RATINGS:
        raise ValidationError(f"unknown rating {raw!r}")
    return rating


def month_before(d: dt.date) -> dt.date:
    """Same day of the previous month, clamped to that month's last day."""
    year, month = (d.year - 1, 12) if d.month == 1 else (d.year, d.month - 1)
    day = min(d.day, calendar.monthrange(year, month)[1])
    return dt.date(year, month, day)


def compute_mar(
    records: list[RecommendationRecord],
    ticker: str,
    call_date: dt.date,
    window_kind: str,
    tie_is_missing: bool = False,
) -> str:
    """Plurality rating in the window, or ``missing`` with no records.

    ``prior_1m`` covers (call_date minus one month, call_date), both ends
    exclusive; ``post_5d`` covers (call_date, call_date + 5 days]. A tie on
    counts resolves to the tied rating with the most recent record (then by
    rating order for full determinism) unless ``tie_is_missing`` is set.
    """
    if window_kind == PRIOR_1M:
        lo, hi = month_before(call_date), call_date

        def in_window(day):
            return lo < day < hi
    elif window_kind == POST_5D:
        lo, hi = call_date, call_date + dt.timedelta(days=5)

        def in_window(day):
            return lo < day <= hi
    else:
        raise ValidationError(f"window_kind must be {PRIOR_1M!r} or {POST_5D!r}")

    counts: dict[str, int] = {}
    latest: dict[str, dt.date] = {}
    for rec in records:
        if rec.ticker != ticker or not in_window(rec.date):
            continue
        counts[rec.rating] = counts.get(rec.rating, 0) + 1
        if rec.rating not in latest or rec.date > latest[rec.rating]:
            latest[rec.rating] = rec.date
    if not counts:
        return MISSING

    top = max(counts.values())
    tied = [r for r, c in counts.items() if c == top]
    if len(tied) == 1:
        return tied[0]
    if tie_is_missing:
        return MISSING
    tied.sort(key=lambda r: (latest[r], -RATINGS.index(r)), reverse=True)
    return tied[0]


def load_recommendations_csv(path) -> list[RecommendationRecord]:
    """Read ``ticker,date,rating`` rows; ratings accept spaces or underscores."""
    records = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"ticker", "date", "rating"} <= set(
                reader.fieldnames
            ):
                raise FileUnreadable(f"{path}: expected header ticker,date,rating")
            for lineno, row in enumerate(reader, start=2):
                try:
                    records.append(RecommendationRecord(
                        ticker=row["ticker"].strip(),
                        date=dt.date.fromisoformat(row["date"].strip()),
                        rating=normalize_rating(row["rating"]),
                    ))
                except (ValueError, ValidationError) as exc:
                    raise FileUnreadable(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    records.sort(key=lambda r: (r.ticker, r.date))
    return records
