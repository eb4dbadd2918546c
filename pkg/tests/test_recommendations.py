import datetime as dt

import numpy as np
import pytest

from ecpipe.errors import FileUnreadable, ValidationError
from ecpipe.recommendations import (
    MISSING,
    POST_5D,
    PRIOR_1M,
    RATINGS,
    RecommendationRecord,
    compute_mar,
    load_recommendations_csv,
    month_before,
    normalize_rating,
)

D = dt.date


def recs(ticker, *pairs):
    return [RecommendationRecord(ticker, d, r) for d, r in pairs]


class TestMonthArithmetic:
    def test_plain(self):
        assert month_before(D(2015, 9, 20)) == D(2015, 8, 20)

    def test_end_of_month_clamped(self):
        assert month_before(D(2019, 3, 31)) == D(2019, 2, 28)
        assert month_before(D(2020, 3, 31)) == D(2020, 2, 29)

    def test_january_wraps(self):
        assert month_before(D(2019, 1, 15)) == D(2018, 12, 15)


class TestComputeMar:
    def test_worked_majority_example(self):
        # ten recommendations in the month before 2015-09-20, six say hold
        call = D(2015, 9, 20)
        pairs = [(D(2015, 8, 21 + i), "hold") for i in range(6)]
        pairs += [(D(2015, 9, 1 + i), "moderate_buy") for i in range(4)]
        assert compute_mar(recs("ACME", *pairs), "ACME", call, PRIOR_1M) == "hold"

    def test_empty_window_is_missing(self):
        assert compute_mar([], "ACME", D(2015, 9, 20), PRIOR_1M) == MISSING

    def test_recency_tie_break(self):
        call = D(2015, 9, 20)
        pairs = [
            (D(2015, 9, 5), "hold"), (D(2015, 9, 10), "hold"),
            (D(2015, 9, 7), "moderate_buy"), (D(2015, 9, 15), "moderate_buy"),
        ]
        assert compute_mar(recs("ACME", *pairs), "ACME", call, PRIOR_1M) == "moderate_buy"

    def test_tie_as_missing_flag(self):
        call = D(2015, 9, 20)
        pairs = [(D(2015, 9, 5), "hold"), (D(2015, 9, 10), "moderate_buy")]
        assert compute_mar(recs("ACME", *pairs), "ACME", call, PRIOR_1M,
                           tie_is_missing=True) == MISSING

    def test_post_window_bounds(self):
        call = D(2019, 6, 10)
        inside = recs("T", (D(2019, 6, 11), "strong_buy"), (D(2019, 6, 15), "strong_buy"))
        on_call_day = recs("T", (call, "strong_sell"))
        after_window = recs("T", (D(2019, 6, 16), "strong_sell"))
        rows = inside + on_call_day + after_window
        assert compute_mar(rows, "T", call, POST_5D) == "strong_buy"
        # day 5 after is included
        assert compute_mar(recs("T", (D(2019, 6, 15), "hold")), "T", call, POST_5D) == "hold"

    def test_prior_window_excludes_endpoints(self):
        call = D(2015, 9, 20)
        rows = recs("T", (D(2015, 8, 20), "strong_sell"), (call, "strong_sell"),
                    (D(2015, 9, 1), "hold"))
        assert compute_mar(rows, "T", call, PRIOR_1M) == "hold"

    def test_other_ticker_ignored(self):
        call = D(2015, 9, 20)
        rows = recs("OTHER", (D(2015, 9, 10), "strong_sell"))
        rows += recs("T", (D(2015, 9, 10), "hold"))
        assert compute_mar(rows, "T", call, PRIOR_1M) == "hold"

    def test_bad_window_kind(self):
        with pytest.raises(ValidationError):
            compute_mar([], "T", D(2019, 1, 1), "prior_2w")

    def test_out_of_window_noise_is_inert(self):
        rng = np.random.default_rng(0)
        base_call = D(2017, 5, 15)
        for _ in range(200):
            n_in = int(rng.integers(1, 8))
            in_window = [
                (base_call - dt.timedelta(days=int(rng.integers(1, 28))),
                 RATINGS[int(rng.integers(len(RATINGS)))])
                for _ in range(n_in)
            ]
            offsets = [int(rng.integers(32, 400)) for _ in range(int(rng.integers(0, 10)))]
            noise = [
                (base_call - dt.timedelta(days=o) if rng.random() < 0.5
                 else base_call + dt.timedelta(days=o),
                 RATINGS[int(rng.integers(len(RATINGS)))])
                for o in offsets
            ]
            clean = compute_mar(recs("T", *in_window), "T", base_call, PRIOR_1M)
            noisy = compute_mar(recs("T", *(in_window + noise)), "T", base_call, PRIOR_1M)
            assert clean == noisy

    def test_duplicate_of_plurality_never_changes_result(self):
        rng = np.random.default_rng(1)
        call = D(2018, 3, 20)
        for _ in range(100):
            pairs = [
                (call - dt.timedelta(days=int(rng.integers(1, 28))),
                 RATINGS[int(rng.integers(len(RATINGS)))])
                for _ in range(int(rng.integers(1, 10)))
            ]
            result = compute_mar(recs("T", *pairs), "T", call, PRIOR_1M)
            if result == MISSING:
                continue
            reinforced = pairs + [(call - dt.timedelta(days=1), result)]
            assert compute_mar(recs("T", *reinforced), "T", call, PRIOR_1M) == result

    def test_result_in_enum_or_missing(self):
        rng = np.random.default_rng(2)
        call = D(2018, 3, 20)
        for _ in range(50):
            pairs = [
                (call - dt.timedelta(days=int(rng.integers(0, 60))),
                 RATINGS[int(rng.integers(len(RATINGS)))])
                for _ in range(int(rng.integers(0, 6)))
            ]
            result = compute_mar(recs("T", *pairs), "T", call, PRIOR_1M)
            assert result in RATINGS + (MISSING,)


class TestLoading:
    def test_normalize_rating_spellings(self):
        assert normalize_rating("Strong Buy") == "strong_buy"
        assert normalize_rating("MODERATE_SELL") == "moderate_sell"
        with pytest.raises(ValidationError):
            normalize_rating("buyish")

    def test_load_csv(self, tmp_path):
        p = tmp_path / "recs.csv"
        p.write_text(
            "ticker,date,rating\n"
            "ACME,2019-01-05,Strong Buy\n"
            "ACME,2019-01-02,hold\n"
        )
        rows = load_recommendations_csv(p)
        assert [r.rating for r in rows] == ["hold", "strong_buy"]  # sorted by date

    def test_load_rejects_bad_rating(self, tmp_path):
        p = tmp_path / "recs.csv"
        p.write_text("ticker,date,rating\nACME,2019-01-05,meh\n")
        with pytest.raises(FileUnreadable):
            load_recommendations_csv(p)
