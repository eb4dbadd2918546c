"""Price series and the three binary label functions.

A trading calendar is never consulted: the days present in a price series
*are* the trading days, so exchange holidays and closures are handled
implicitly. All label functions read closing prices only.

Label kinds
-----------
* value: 1 iff the close on the next trading day exceeds the close on the
  previous trading day (equality counts as 0).
* shock: 1 for a relative move of at least ``tau`` upward, 0 for at least
  ``tau`` downward, undefined otherwise. Undefined examples are dropped by
  callers, which is why shock datasets are smaller.
* index: compares five post-event daily returns against a reference index
  and requires at least ``k`` agreeing days in either direction.
"""

from __future__ import annotations

import bisect
import csv
import datetime as dt
from dataclasses import dataclass, field

from .defaults import IBL_K_CHOICES, MAX_NEIGHBOR_GAP_DAYS
from .errors import FileUnreadable, InvalidK, InvalidTau, MissingPrice, NoNeighbor


@dataclass(frozen=True)
class PriceSeries:
    """Ordered closing prices for one symbol.

    Dates must be strictly increasing and every close positive; the
    constructor enforces both.
    """

    symbol: str
    dates: tuple[dt.date, ...]
    closes: tuple[float, ...]
    _index: dict[dt.date, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.dates) != len(self.closes):
            raise ValueError("dates and closes must have equal length")
        for i in range(1, len(self.dates)):
            if self.dates[i] <= self.dates[i - 1]:
                raise ValueError(
                    f"{self.symbol}: dates not strictly increasing at {self.dates[i]}"
                )
        for d, c in zip(self.dates, self.closes):
            if not c > 0:
                raise ValueError(f"{self.symbol}: non-positive close {c} on {d}")
        object.__setattr__(self, "_index", {d: i for i, d in enumerate(self.dates)})

    def __len__(self) -> int:
        return len(self.dates)

    def close_on(self, d: dt.date) -> float:
        try:
            return self.closes[self._index[d]]
        except KeyError:
            raise MissingPrice(f"{self.symbol}: no close on {d}") from None


@dataclass(frozen=True)
class PerfVector:
    """Binary outcomes for the five trading days after an event day."""

    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) != 5:
            raise ValueError("performance vector must have exactly 5 entries")
        if any(e not in (0, 1) for e in self.entries):
            raise ValueError("performance vector entries must be 0 or 1")

    def ones(self) -> int:
        return sum(self.entries)

    def zeros(self) -> int:
        return 5 - self.ones()


@dataclass(frozen=True)
class LabeledExample:
    """A transcript reference paired with one computed binary label."""

    transcript_id: str
    label_kind: str  # "value" | "shock" | "index"
    label: int
    tau: float | None = None
    k: int | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")


def business_neighbor(
    series: PriceSeries,
    d: dt.date,
    direction: str,
    max_gap_days: int = MAX_NEIGHBOR_GAP_DAYS,
) -> dt.date:
    """Nearest trading day strictly before or after ``d``.

    Raises NoNeighbor when the nearest candidate is more than
    ``max_gap_days`` calendar days away (or does not exist), which signals
    missing data rather than a long weekend.
    """
    if direction not in ("prev", "next"):
        raise ValueError(f"direction must be 'prev' or 'next', got {direction!r}")
    if len(series) == 0:
        raise NoNeighbor(f"{series.symbol}: empty series")

    if direction == "prev":
        i = bisect.bisect_left(series.dates, d) - 1
    else:
        i = bisect.bisect_right(series.dates, d)
    if i < 0 or i >= len(series):
        raise NoNeighbor(f"{series.symbol}: no {direction} trading day for {d}")
    neighbor = series.dates[i]
    if abs((neighbor - d).days) > max_gap_days:
        raise NoNeighbor(
            f"{series.symbol}: nearest {direction} trading day {neighbor} is more "
            f"than {max_gap_days} days from {d}"
        )
    return neighbor


def compute_vbl(series: PriceSeries, d: dt.date, max_gap_days: int = MAX_NEIGHBOR_GAP_DAYS) -> int:
    """Value label: 1 iff next-day close strictly exceeds previous-day close."""
    prev_close = series.close_on(business_neighbor(series, d, "prev", max_gap_days))
    next_close = series.close_on(business_neighbor(series, d, "next", max_gap_days))
    return 1 if next_close > prev_close else 0


def compute_sbl(
    series: PriceSeries,
    d: dt.date,
    tau: float,
    max_gap_days: int = MAX_NEIGHBOR_GAP_DAYS,
) -> int | None:
    """Shock label: 1 for a >= tau relative rise, 0 for a >= tau drop.

    Returns None when neither branch fires; the example is excluded
    downstream. The shock label is a partial function by construction.
    """
    if not tau > 0:
        raise InvalidTau(f"tau must be positive, got {tau}")
    prev_close = series.close_on(business_neighbor(series, d, "prev", max_gap_days))
    next_close = series.close_on(business_neighbor(series, d, "next", max_gap_days))
    if (next_close - prev_close) / prev_close >= tau:
        return 1
    if (prev_close - next_close) / prev_close >= tau:
        return 0
    return None


def rate_of_increase(series: PriceSeries, d: dt.date, max_gap_days: int = MAX_NEIGHBOR_GAP_DAYS) -> float:
    """One-day relative change ending on trading day ``d``."""
    close_d = series.close_on(d)
    prev = business_neighbor(series, d, "prev", max_gap_days)
    prev_close = series.close_on(prev)
    return (close_d - prev_close) / prev_close


def perf_vector(
    stock: PriceSeries,
    index: PriceSeries,
    d: dt.date,
    max_gap_days: int = MAX_NEIGHBOR_GAP_DAYS,
) -> PerfVector:
    """Five post-event days of stock-return vs index-return comparisons.

    The stock's own calendar defines the five post-event trading days; the
    index must quote on each of them. Entry i is 1 iff the stock's daily
    rate of increase strictly beats the index's on that day (ties are 0).
    """
    entries = []
    day = d
    for _ in range(5):
        day = business_neighbor(stock, day, "next", max_gap_days)
        stock_rate = rate_of_increase(stock, day, max_gap_days)
        index_rate = rate_of_increase(index, day, max_gap_days)
        entries.append(1 if stock_rate > index_rate else 0)
    return PerfVector(tuple(entries))


def compute_ibl(v: PerfVector, k: int) -> int | None:
    """Index label: 1 with >= k up-days, 0 with >= k down-days, else None.

    For k >= 3 on a length-5 vector at most one branch can hold, so the
    result is never ambiguous.
    """
    if k not in IBL_K_CHOICES:
        raise InvalidK(f"k must be one of {IBL_K_CHOICES}, got {k}")
    if v.ones() >= k:
        return 1
    if v.zeros() >= k:
        return 0
    return None


def load_price_csv(path) -> dict[str, PriceSeries]:
    """Read a ``symbol,date,close`` CSV into one PriceSeries per symbol.

    Dates are ISO-8601. Rows may arrive unsorted; they are sorted per symbol
    before series construction, and duplicate symbol-days are rejected.
    """
    rows_by_symbol: dict[str, list[tuple[dt.date, float]]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"symbol", "date", "close"} <= set(
                reader.fieldnames
            ):
                raise FileUnreadable(f"{path}: expected header symbol,date,close")
            for lineno, row in enumerate(reader, start=2):
                try:
                    symbol = row["symbol"].strip()
                    date = dt.date.fromisoformat(row["date"].strip())
                    close = float(row["close"])
                except (ValueError, AttributeError, KeyError) as exc:
                    raise FileUnreadable(f"{path}:{lineno}: bad price row: {exc}") from exc
                rows_by_symbol.setdefault(symbol, []).append((date, close))
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc

    out = {}
    for symbol, rows in rows_by_symbol.items():
        rows.sort(key=lambda r: r[0])
        for i in range(1, len(rows)):
            if rows[i][0] == rows[i - 1][0]:
                raise FileUnreadable(f"{path}: duplicate date {rows[i][0]} for {symbol}")
        out[symbol] = PriceSeries(
            symbol=symbol,
            dates=tuple(r[0] for r in rows),
            closes=tuple(r[1] for r in rows),
        )
    return out
