"""Relational store: schema validation, CSV loading, row graph, windows."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import SCHEMA_DOCS
from conftest import TRANSACTIONS_CSV, build_toy_db

from pql.errors import DataError, SchemaError
from pql.store import (
    FkEdge,
    RowRef,
    build_row_graph,
    children_in_window,
    load_schema,
    load_table_data,
    new_database,
)
from pql.times import MICROS_PER_DAY, parse_timestamp

TX_EDGE = FkEdge("TRANSACTIONS", "CUSTOMER_ID", "CUSTOMERS")
T = parse_timestamp


class TestLoadSchema:
    def test_retail_schema(self):
        schema = load_schema(SCHEMA_DOCS["retail"])
        assert set(schema.tables) == {"CUSTOMERS", "ARTICLES", "TRANSACTIONS", "NOTIFICATIONS"}
        tx = schema.table("transactions")  # case-insensitive lookup
        assert tx.primary_key == "TRANSACTION_ID"
        assert len(tx.foreign_keys) == 2
        assert tx.time_column == "TIMESTAMP"
        assert schema.table("NOTIFICATIONS").primary_key is None

    def test_empty_tables(self):
        assert load_schema({"tables": []}).tables == {}

    def test_unresolved_fk_target(self):
        doc = {
            "tables": [
                {
                    "name": "A",
                    "columns": [
                        {"name": "ID", "dtype": "int64", "stype": "key"},
                        {"name": "B_ID", "dtype": "int64", "stype": "key"},
                    ],
                    "primary_key": "ID",
                    "foreign_keys": [{"column": "B_ID", "references": "B"}],
                }
            ]
        }
        with pytest.raises(SchemaError, match="unresolved foreign key"):
            load_schema(doc)

    def test_fk_target_without_pk(self):
        doc = {
            "tables": [
                {"name": "B", "columns": [{"name": "X", "dtype": "int64", "stype": "numerical"}]},
                {
                    "name": "A",
                    "columns": [{"name": "B_ID", "dtype": "int64", "stype": "key"}],
                    "foreign_keys": [{"column": "B_ID", "references": "B"}],
                },
            ]
        }
        with pytest.raises(SchemaError, match="no primary key"):
            load_schema(doc)

    def test_duplicate_column(self):
        doc = {
            "tables": [
                {
                    "name": "A",
                    "columns": [
                        {"name": "X", "dtype": "int64", "stype": "numerical"},
                        {"name": "x", "dtype": "int64", "stype": "numerical"},
                    ],
                }
            ]
        }
        with pytest.raises(SchemaError, match="duplicate column"):
            load_schema(doc)

    def test_bad_dtype_stype_combination(self):
        doc = {
            "tables": [
                {"name": "A", "columns": [{"name": "X", "dtype": "string", "stype": "numerical"}]}
            ]
        }
        with pytest.raises(SchemaError, match="bad dtype/stype"):
            load_schema(doc)

    def test_one_sided_validity(self):
        doc = {
            "tables": [
                {
                    "name": "A",
                    "columns": [
                        {"name": "ID", "dtype": "int64", "stype": "key"},
                        {"name": "SINCE", "dtype": "timestamp", "stype": "temporal"},
                    ],
                    "primary_key": "ID",
                    "validity": {"start": "SINCE"},
                }
            ]
        }
        schema = load_schema(doc)
        assert schema.table("A").validity == ("SINCE", None)

    def test_time_column_must_be_timestamp(self):
        doc = {
            "tables": [
                {
                    "name": "A",
                    "columns": [{"name": "X", "dtype": "int64", "stype": "numerical"}],
                    "time_column": "X",
                }
            ]
        }
        with pytest.raises(SchemaError, match="must be a timestamp"):
            load_schema(doc)


class TestLoadData:
    def test_row_counts(self, toy_db):
        assert toy_db.nrows("CUSTOMERS") == 3
        assert toy_db.nrows("TRANSACTIONS") == 8
        assert toy_db.total_rows() == 16

    def test_null_parsing(self, toy_db):
        col = toy_db.table("TRANSACTIONS").column("VALUE")
        assert col.get(5) is None  # row 6: empty VALUE cell
        assert col.get(0) == 10.0
        tcol = toy_db.table("TRANSACTIONS").column("TIMESTAMP")
        assert tcol.get(7) is None  # undated transaction

    def test_duplicate_pk(self, retail_schema):
        db = new_database(retail_schema)
        bad = "CUSTOMER_ID,LOCATION_ID,SIGNUP_DATE,MEMBERSHIP_TYPE\n1,a,,x\n1,b,,x\n"
        with pytest.raises(DataError, match="duplicate primary key"):
            load_table_data(db, "CUSTOMERS", bad)

    def test_parse_error_reports_row_and_column(self, retail_schema):
        db = new_database(retail_schema)
        bad = "CUSTOMER_ID,LOCATION_ID,SIGNUP_DATE,MEMBERSHIP_TYPE\nzap,a,,x\n"
        with pytest.raises(DataError, match="row 1, column CUSTOMER_ID"):
            load_table_data(db, "CUSTOMERS", bad)

    def test_header_mismatch(self, retail_schema):
        db = new_database(retail_schema)
        with pytest.raises(DataError, match="does not match schema columns"):
            load_table_data(db, "CUSTOMERS", "CUSTOMER_ID,WRONG\n1,x\n")

    def test_dangling_fk_strict_vs_lenient(self, retail_schema):
        rows = (
            "TRANSACTION_ID,VALUE,TIMESTAMP,CUSTOMER_ID,ARTICLE_ID\n"
            "1,5.0,2024-01-01,999,\n"
        )
        db = build_toy_db(retail_schema)
        with pytest.raises(DataError, match="no match in CUSTOMERS"):
            load_table_data(db, "TRANSACTIONS", rows, strict=True)
        db2 = build_toy_db(retail_schema)
        load_table_data(db2, "TRANSACTIONS", rows, strict=False)
        assert db2.nrows("TRANSACTIONS") == 1
        report = db2.reports[-1]
        assert report.dangling_fk == 1 and report.samples

    def test_null_fk_allowed_in_strict_mode(self, retail_schema):
        db = build_toy_db(retail_schema)
        rows = "TRANSACTION_ID,VALUE,TIMESTAMP,CUSTOMER_ID,ARTICLE_ID\n1,5.0,2024-01-01,,1\n"
        load_table_data(db, "TRANSACTIONS", rows, strict=True)
        assert db.nrows("TRANSACTIONS") == 1


class TestRowGraph:
    def test_children_time_sorted(self, toy_db, toy_graph):
        kids = toy_graph.all_children(RowRef("CUSTOMERS", 0), TX_EDGE)
        times = [toy_db.value(k, "TIMESTAMP") for k in kids]
        dated = [t for t in times if t is not None]
        assert dated == sorted(dated)
        assert times[-1] is None  # undated child sits last

    def test_shuffled_load_order_still_sorted(self, retail_schema):
        lines = TRANSACTIONS_CSV.strip().splitlines()
        shuffled = [lines[0]] + list(reversed(lines[1:]))
        db = build_toy_db(retail_schema)
        load_table_data(db, "TRANSACTIONS", "\n".join(shuffled))
        g = build_row_graph(db)
        kids = g.all_children(RowRef("CUSTOMERS", 1), TX_EDGE)
        times = [db.value(k, "TIMESTAMP") for k in kids]
        assert times == sorted(times)

    def test_no_children(self, toy_graph):
        edge = FkEdge("NOTIFICATIONS", "CUSTOMER_ID", "CUSTOMERS")
        assert toy_graph.all_children(RowRef("CUSTOMERS", 2), edge) == []

    def test_window_half_open(self, toy_graph, toy_db):
        lo, hi = T("2024-01-01"), T("2024-01-31")
        kids = children_in_window(toy_graph, RowRef("CUSTOMERS", 0), TX_EDGE, lo, hi)
        assert [k.index for k in kids] == [0, 1]  # tx 1 and 2; tx3 later, tx8 undated
        assert children_in_window(toy_graph, RowRef("CUSTOMERS", 0), TX_EDGE, lo, lo) == []

    def test_window_includes_lower_excludes_upper(self, toy_graph):
        exact = T("2024-01-05")
        kids = children_in_window(toy_graph, RowRef("CUSTOMERS", 0), TX_EDGE, exact, exact + 1)
        assert [k.index for k in kids] == [0]
        kids = children_in_window(toy_graph, RowRef("CUSTOMERS", 0), TX_EDGE, exact - 1, exact)
        assert kids == []

    def test_wrong_parent_table(self, toy_graph):
        with pytest.raises(DataError, match="cannot be a parent"):
            children_in_window(toy_graph, RowRef("ARTICLES", 0), TX_EDGE, None, None)

    def test_window_matches_linear_scan(self, toy_db, toy_graph):
        rng = np.random.default_rng(0)
        base = T("2023-12-01")
        tcol = toy_db.table("TRANSACTIONS").column("TIMESTAMP")
        ccol = toy_db.table("TRANSACTIONS").column("CUSTOMER_ID")
        for _ in range(200):
            lo = base + int(rng.integers(0, 90)) * MICROS_PER_DAY
            hi = lo + int(rng.integers(0, 40)) * MICROS_PER_DAY
            parent = int(rng.integers(0, 3))
            got = children_in_window(toy_graph, RowRef("CUSTOMERS", parent), TX_EDGE, lo, hi)
            key = parent + 1
            want = sorted(
                i
                for i in range(toy_db.nrows("TRANSACTIONS"))
                if ccol.get(i) == key and tcol.get(i) is not None and lo <= tcol.get(i) < hi
            )
            assert sorted(k.index for k in got) == want

    @settings(max_examples=60, deadline=None)
    @given(cuts=st.lists(st.integers(0, 120), min_size=0, max_size=6), parent=st.integers(0, 2))
    def test_partition_tiles_exactly_once(self, toy_graph, cuts, parent):
        base = T("2023-10-01")
        bounds = [None] + [base + c * MICROS_PER_DAY for c in sorted(cuts)] + [None]
        ref = RowRef("CUSTOMERS", parent)
        pieces = []
        for lo, hi in zip(bounds, bounds[1:]):
            pieces.extend(children_in_window(toy_graph, ref, TX_EDGE, lo, hi))
        full = children_in_window(toy_graph, ref, TX_EDGE, None, None)
        assert sorted(p.index for p in pieces) == sorted(f.index for f in full)
        assert len(pieces) == len(full)
