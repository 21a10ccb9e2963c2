"""Parser structure, precedence, errors, and the unparse round trip."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import CORPUS, CORPUS_BY_NAME

from pql import ast
from pql.ast import (
    AggKind,
    Aggregation,
    And,
    ColumnRef,
    Compare,
    Constant,
    ConstKind,
    Hint,
    Not,
    Or,
    RelOp,
    TimeUnit,
    Window,
    unparse,
)
from pql.errors import ParseError
from pql.parser import parse


class TestCorpus:
    @pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
    def test_parses(self, entry):
        parse(entry.text)

    @pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
    def test_round_trips(self, entry):
        q = parse(entry.text)
        assert parse(unparse(q)) == q


class TestStructure:
    def test_timeline_example_shape(self):
        q = parse(CORPUS_BY_NAME["active_spender"].text)
        assert isinstance(q.target, Or)
        left, right = q.target.left, q.target.right
        assert isinstance(left, Compare) and left.lhs.kind is AggKind.SUM
        assert left.lhs.window == Window(15, 45, TimeUnit.DAYS)
        assert isinstance(right.lhs, Aggregation) and right.lhs.column.is_wildcard
        assert q.entity == ColumnRef("CUSTOMERS", "CUSTOMER_ID")
        flt = q.entity_where
        assert isinstance(flt, Compare) and flt.lhs.window == Window(-40, 0, TimeUnit.DAYS)

    def test_rank_top_k(self):
        q = parse(CORPUS_BY_NAME["store_recommendation"].text)
        assert q.hint is Hint.RANK and q.top_k == 12
        assert q.target.kind is AggKind.LIST_DISTINCT
        assert q.target.window == Window(0, 7, TimeUnit.DAYS)

    def test_filtered_wildcard_inside_aggregation(self):
        q = parse(CORPUS_BY_NAME["push_conversion"].text)
        agg = q.assuming.lhs
        assert agg.column.is_wildcard and agg.where is not None

    def test_two_argument_window_defaults_to_days(self):
        q = parse("PREDICT COUNT(T.*, 0, 30) FOR EACH E.ID")
        assert q.target.window == Window(0, 30, TimeUnit.DAYS)

    def test_window_units(self):
        for unit in TimeUnit:
            q = parse(f"PREDICT COUNT(T.*, 0, 3, {unit.value}) FOR EACH E.ID")
            assert q.target.window.unit is unit
        q = parse("PREDICT COUNT(T.*, 0, 3, day) FOR EACH E.ID")  # singular
        assert q.target.window.unit is TimeUnit.DAYS

    def test_minus_inf_window(self):
        q = parse("PREDICT T.C FOR EACH T.ID WHERE COUNT(U.*, -INF, 0, days) > 1")
        assert q.entity_where.lhs.window.start is None

    def test_array_constant(self):
        q = parse('PREDICT T.C FOR EACH T.ID WHERE T.TAG IN ["a", "b"]')
        arr = q.entity_where.rhs
        assert arr.kind is ConstKind.ARRAY
        assert [e.value for e in arr.value] == ["a", "b"]

    def test_is_null_and_is_not_null(self):
        q = parse("PREDICT T.C FOR EACH T.ID WHERE T.X IS NULL AND T.Y IS NOT NULL")
        assert q.entity_where.left.op is RelOp.IS
        assert q.entity_where.right.op is RelOp.IS_NOT

    def test_multiword_operators(self):
        cases = {
            "T.X NOT LIKE 'a%'": RelOp.NOT_LIKE,
            "T.X NOT CONTAINS 'a'": RelOp.NOT_CONTAINS,
            "T.X STARTS WITH 'a'": RelOp.STARTS_WITH,
            "T.X ENDS WITH 'a'": RelOp.ENDS_WITH,
            "T.X IS IN ['a']": RelOp.IS_IN,
        }
        for text, op in cases.items():
            q = parse(f"PREDICT T.C FOR EACH T.ID WHERE {text}")
            assert q.entity_where.op is op


class TestCanonicalText:
    def test_minimal_query_canonical_casing(self):
        assert unparse(parse("predict t.c for each t.k")) == "PREDICT T.C FOR EACH T.K"

    def test_canonical_text_is_fixed_point(self):
        text = unparse(parse(CORPUS_BY_NAME["active_spender_notified"].text))
        assert unparse(parse(text)) == text
        assert text == (
            "PREDICT SUM(TRANSACTIONS.VALUE, 15, 45, days) > 100 OR "
            "COUNT(TRANSACTIONS.*, 15, 45, days) > 10 "
            "FOR EACH CUSTOMERS.CUSTOMER_ID "
            "WHERE COUNT(TRANSACTIONS.*, -40, 0, days) > 0 "
            "ASSUMING COUNT(NOTIFICATIONS.*, 0, 15, days) > 0"
        )


class TestPrecedence:
    def test_or_binds_looser_than_and(self):
        q = parse("PREDICT T.A = 1 OR T.B = 2 AND T.C = 3 FOR EACH T.ID")
        assert isinstance(q.target, Or)
        assert isinstance(q.target.right, And)

    def test_not_binds_tightest(self):
        q = parse("PREDICT NOT T.A = 1 AND T.B = 2 FOR EACH T.ID")
        assert isinstance(q.target, And)
        assert isinstance(q.target.left, Not)

    def test_parentheses_override(self):
        q = parse("PREDICT (T.A = 1 OR T.B = 2) AND T.C = 3 FOR EACH T.ID")
        assert isinstance(q.target, And)
        assert isinstance(q.target.left, Or)


class TestErrors:
    def test_trailing_input(self):
        with pytest.raises(ParseError, match="expected end of query"):
            parse("PREDICT A.B FOR EACH A.B FOR EACH A.B")

    def test_top_without_rank(self):
        with pytest.raises(ParseError, match="TOP requires RANK"):
            parse("PREDICT LIST_DISTINCT(T.C, 0, 7, days) TOP 5 FOR EACH E.ID")

    def test_top_needs_positive(self):
        with pytest.raises(ParseError, match="positive integer"):
            parse("PREDICT LIST_DISTINCT(T.C, 0, 7, days) RANK TOP 0 FOR EACH E.ID")

    def test_wildcard_only_with_count(self):
        with pytest.raises(ParseError, match="wildcard column only allowed with COUNT"):
            parse("PREDICT SUM(T.*, 0, 7, days) FOR EACH E.ID")

    def test_window_start_before_end(self):
        with pytest.raises(ParseError, match="window start must be less than end"):
            parse("PREDICT COUNT(T.*, 30, 0, days) FOR EACH E.ID")

    def test_bare_operand_in_condition_position(self):
        with pytest.raises(ParseError, match="comparison"):
            parse("PREDICT T.C FOR EACH T.ID WHERE T.X")

    def test_unknown_time_unit(self):
        with pytest.raises(ParseError, match="unknown time unit"):
            parse("PREDICT COUNT(T.*, 0, 3, fortnights) FOR EACH E.ID")

    def test_expected_token_report(self):
        with pytest.raises(ParseError, match="expected 'FOR'"):
            parse("PREDICT T.C")

    def test_mixed_array_rejected(self):
        with pytest.raises(ParseError, match="share one scalar type"):
            parse('PREDICT T.C FOR EACH T.ID WHERE T.X IN [1, "a"]')


# ---------------------------------------------------------------------------
# Property: parse(unparse(q)) == q for generated ASTs

_idents = st.from_regex(r"[A-Z][A-Z0-9_]{0,5}", fullmatch=True)
_columns = st.builds(ColumnRef, _idents, _idents)
_wildcards = st.builds(lambda t: ColumnRef(t, "*"), _idents)

_scalars = st.one_of(
    st.builds(lambda v: Constant(ConstKind.INT, v), st.integers(-10**6, 10**6)),
    st.builds(
        lambda v: Constant(ConstKind.FLOAT, v),
        st.floats(allow_nan=False, allow_infinity=False, width=64),
    ),
    st.builds(lambda v: Constant(ConstKind.STRING, v), st.text(max_size=10)),
    st.builds(lambda v: Constant(ConstKind.BOOL, v), st.booleans()),
)
_arrays = st.one_of(
    st.builds(lambda vs: Constant(ConstKind.ARRAY, tuple(vs)),
              st.lists(st.builds(lambda v: Constant(ConstKind.INT, v), st.integers(0, 99)),
                       max_size=3)),
    st.builds(lambda vs: Constant(ConstKind.ARRAY, tuple(vs)),
              st.lists(st.builds(lambda v: Constant(ConstKind.STRING, v), st.text(max_size=5)),
                       max_size=3)),
)
_windows = st.one_of(
    st.none(),
    st.builds(
        lambda a, b, u: Window(a, a + b if a is not None else b, u),
        st.one_of(st.none(), st.integers(-90, 90)),
        st.integers(1, 90),
        st.sampled_from(list(TimeUnit)),
    ),
)


def _conditions(depth: int):
    leaf = st.one_of(
        st.builds(
            Compare,
            st.one_of(_columns, _aggregations(depth - 1)) if depth > 0 else _columns,
            st.sampled_from(
                [RelOp.EQ, RelOp.NE, RelOp.LT, RelOp.LE, RelOp.GT, RelOp.GE,
                 RelOp.LIKE, RelOp.NOT_LIKE, RelOp.CONTAINS, RelOp.NOT_CONTAINS,
                 RelOp.STARTS_WITH, RelOp.ENDS_WITH]
            ),
            _scalars,
        ),
        st.builds(Compare, _columns, st.sampled_from([RelOp.IN, RelOp.IS_IN]), _arrays),
        st.builds(
            Compare, _columns, st.sampled_from([RelOp.IS, RelOp.IS_NOT]),
            st.just(Constant(ConstKind.NULL, None)),
        ),
    )
    if depth <= 0:
        return leaf
    sub = _conditions(depth - 1)
    return st.one_of(leaf, st.builds(Not, sub), st.builds(And, sub, sub), st.builds(Or, sub, sub))


def _aggregations(depth: int):
    inner = st.none() if depth <= 0 else st.one_of(st.none(), _conditions(depth - 1))
    plain = st.builds(
        Aggregation,
        st.sampled_from([k for k in AggKind if k is not AggKind.COUNT]),
        _columns,
        inner,
        _windows,
    )
    counting = st.builds(
        Aggregation, st.just(AggKind.COUNT), st.one_of(_columns, _wildcards), inner, _windows
    )
    return st.one_of(plain, counting)


_queries = st.builds(
    lambda target, entity, where, assuming, rank_k: ast.Query(
        target=target,
        entity=entity,
        entity_where=where,
        assuming=assuming,
        hint=Hint.RANK if rank_k else None,
        top_k=rank_k,
    ),
    st.one_of(_columns, _aggregations(1), _conditions(2)),
    _columns,
    st.one_of(st.none(), _conditions(2)),
    st.one_of(st.none(), _conditions(1)),
    st.one_of(st.none(), st.integers(1, 50)),
)


@settings(max_examples=300, deadline=None)
@given(_queries)
def test_roundtrip_generated_asts(query):
    assert parse(unparse(query)) == query
