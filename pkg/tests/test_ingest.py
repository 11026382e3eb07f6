import io
import os
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from importcast.errors import RowError, SchemaError
from importcast.ingest import (IDENTITY_SCHEMA, SeriesRecord, build_timeline, compute_shares,
                               parse_records, write_shares)
from importcast.series import MonthStamp

from conftest import records_csv


def parse(text, **kw):
    return parse_records(io.StringIO(text), **kw)


class TestParse:
    def test_header_only(self):
        assert parse("ANIO,MES,PRODUCTO,PESO\n") == []

    def test_identity_schema_row(self):
        recs = parse("year,month,product,weight\n2021,5,3P,1000.5\n", schema=IDENTITY_SCHEMA)
        assert recs == [SeriesRecord(2021, 5, "3P", 1000.5)]

    def test_extra_columns_and_order(self):
        text = "PESO,X,PRODUCTO,MES,ANIO\n1,a,A,5,2021\n2,b,B,6,2021\n"
        recs = parse(text)
        assert [r.product_id for r in recs] == ["A", "B"]

    def test_custom_delimiter(self):
        recs = parse("ANIO;MES;PRODUCTO;PESO\n2021;5;A;10\n", delimiter=";")
        assert recs[0].weight_kg == 10.0

    def test_month_out_of_range(self):
        with pytest.raises(RowError) as err:
            parse(records_csv([(2021, 5, "A", 1), (2021, 13, "A", 1)]))
        assert err.value.line == 3

    @pytest.mark.parametrize("weight", ["-1", "abc", "nan", ""])
    def test_bad_weight(self, weight):
        with pytest.raises(RowError):
            parse(records_csv([(2021, 5, "A", weight)]))

    def test_skip_and_count(self):
        rejected = []
        text = records_csv([(2021, 5, "A", 1), (2021, 0, "A", 1), (2021, 6, "A", -3),
                            (2021, 7, "A", 2)])
        recs = parse(text, on_error="skip", rejected=rejected)
        assert [r.month for r in recs] == [5, 7]
        assert [e.line for e in rejected] == [3, 4]

    def test_missing_column(self):
        with pytest.raises(SchemaError) as err:
            parse("ANIO,MES,PRODUCTO,KG\n2021,5,A,1\n")
        assert err.value.column == "PESO"


class TestTimeline:
    def test_same_month_summed(self):
        s, gaps = build_timeline([SeriesRecord(2021, 5, "A", 10), SeriesRecord(2021, 5, "A", 5)])
        assert len(s) == 1 and s.values[0] == 15 and gaps == []

    def test_gap_fill(self):
        s, gaps = build_timeline([SeriesRecord(2021, 5, "A", 1), SeriesRecord(2021, 7, "A", 2)])
        assert s.values.tolist() == [1.0, 0.0, 2.0]
        assert gaps == [MonthStamp(2021, 6)]

    def test_span_is_14_months(self):
        recs = [SeriesRecord(2021, 5, "A", 1), SeriesRecord(2022, 6, "B", 1)]
        s, _ = build_timeline(recs)
        assert len(s) == 14

    def test_product_filter(self):
        recs = [SeriesRecord(2021, 5, "A", 1), SeriesRecord(2021, 6, "B", 4),
                SeriesRecord(2021, 7, "A", 2)]
        s, gaps = build_timeline(recs, "A")
        assert s.values.tolist() == [1.0, 0.0, 2.0]

    def test_unknown_product(self):
        with pytest.raises(ValueError, match="'Z'"):
            build_timeline([SeriesRecord(2021, 5, "A", 1)], "Z")

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(2019, 2023), st.integers(1, 12),
                              st.sampled_from("ABC"), st.floats(0, 1e7)), min_size=1, max_size=60))
    def test_length_and_total(self, rows):
        recs = [SeriesRecord(*r) for r in rows]
        s, gaps = build_timeline(recs)
        first = min(r.stamp for r in recs)
        last = max(r.stamp for r in recs)
        assert len(s) == 12 * (last.year - first.year) + (last.month - first.month) + 1
        total = sum(r.weight_kg for r in recs)
        assert s.values.sum() == pytest.approx(total, rel=1e-6, abs=1e-9)
        assert len(gaps) == int(np.sum(s.values == 0)) or any(r.weight_kg == 0 for r in recs)


class TestShares:
    def test_single_product(self):
        shares = compute_shares([SeriesRecord(2021, 5, "A", 3)])
        assert [(s.product_id, s.share) for s in shares] == [("A", 1.0)]

    def test_three_to_one(self):
        recs = [SeriesRecord(2021, 5, "B", 10), SeriesRecord(2021, 5, "A", 30)]
        assert [(s.product_id, s.share) for s in compute_shares(recs)] == [("A", 0.75), ("B", 0.25)]

    def test_ties_break_by_id(self):
        recs = [SeriesRecord(2021, 5, p, 1) for p in "CAB"]
        assert [s.product_id for s in compute_shares(recs)] == ["A", "B", "C"]

    def test_all_zero(self):
        with pytest.raises(ValueError):
            compute_shares([SeriesRecord(2021, 5, "A", 0)])

    def test_csv(self):
        buf = io.StringIO()
        write_shares(compute_shares([SeriesRecord(2021, 5, "A", 30), SeriesRecord(2021, 5, "B", 10)]), buf)
        assert buf.getvalue() == "product_id,total_kg,share\nA,30.0,0.75\nB,10.0,0.25\n"

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.sampled_from("ABCDE"), st.floats(0.001, 1e6)), min_size=1, max_size=40),
           st.randoms(use_true_random=False))
    def test_sum_and_permutation(self, rows, rnd):
        recs = [SeriesRecord(2021, 5, p, w) for p, w in rows]
        shares = compute_shares(recs)
        assert sum(s.share for s in shares) == pytest.approx(1.0, abs=1e-9)
        shuffled = recs[:]
        rnd.shuffle(shuffled)
        assert compute_shares(shuffled) == shares


DATASET = os.environ.get("IMPORTCAST_DATASET")


@pytest.mark.external_data
@pytest.mark.skipif(not DATASET, reason="set IMPORTCAST_DATASET to the import dataset CSV")
class TestExternalCorpus:
    """Checks against the published description of the 2021-2022 corpus."""

    @pytest.fixture(scope="class")
    def records(self):
        schema = {"year": os.environ.get("IMPORTCAST_COL_YEAR", "ANIO"),
                  "month": os.environ.get("IMPORTCAST_COL_MONTH", "MES"),
                  "product": os.environ.get("IMPORTCAST_COL_PRODUCT", "PRODUCTO"),
                  "weight": os.environ.get("IMPORTCAST_COL_WEIGHT", "PESO")}
        with open(DATASET, encoding="utf-8", newline="") as fh:
            return parse_records(fh, schema, delimiter=os.environ.get("IMPORTCAST_DELIMITER", ","),
                                 on_error="skip")

    def test_product_count(self, records):
        assert len({r.product_id for r in records}) == 848

    def test_fourteen_month_span(self, records):
        s, _ = build_timeline(records)
        assert (s.start, s.end, len(s)) == (MonthStamp(2021, 5), MonthStamp(2022, 6), 14)

    def test_top_shares(self, records):
        top = [s.share for s in compute_shares(records)[:3]]
        assert top == pytest.approx([0.231, 0.063, 0.042], abs=5e-4)
