"""Vectorized evaluation kernels over the columnar store and row graph.

Everything here computes per-row numpy arrays for a batch of base rows at
one anchor. Two gather modes drive the two execution strategies:

* restricted — children are sliced per parent out of the CSR adjacency
  (binary search per parent), so work scales with the selected parents;
* full scan — one boolean mask over a whole child table per anchor, the
  shape of the baseline cross-product strategy.

Null semantics match the scalar evaluator: a comparison with a null or
undefined operand is false (IS / IS NOT excepted), connectives are
two-valued.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .ast import AggKind, RelOp, NULL_OPS
from .binder import (
    BoundAggregation,
    BoundAnd,
    BoundColumn,
    BoundCompare,
    BoundCondition,
    BoundNot,
    BoundOr,
    BoundTarget,
)
from .store import Database, DataType, EdgeIndex, RowGraph

_INT_MIN = np.iinfo(np.int64).min
_INT_MAX = np.iinfo(np.int64).max


@dataclass
class VecCtx:
    db: Database
    g: RowGraph
    regexes: Dict[int, "re.Pattern"] = field(default_factory=dict)
    # When set, child gathers always scan the whole child table (the shape
    # of the unoptimized cross-product strategy) instead of slicing the CSR
    # adjacency per selected parent.
    fullscan: bool = False


def like_regex(pattern: str) -> "re.Pattern":
    """Translate a LIKE pattern (% = any run, _ = one char) to a regex."""
    out = []
    for ch in pattern:
        if ch == "%":
            out.append(".*")
        elif ch == "_":
            out.append(".")
        else:
            out.append(re.escape(ch))
    return re.compile("".join(out), re.DOTALL)


def _edge_slot_arrays(idx: EdgeIndex):
    """Lazy per-slot parent ids and dated flags for full-scan gathers."""
    if not hasattr(idx, "_slot_parent"):
        n_parent = len(idx.indptr) - 1
        counts = np.diff(idx.indptr)
        slot_parent = np.repeat(np.arange(n_parent, dtype=np.int64), counts)
        slot_pos = np.arange(len(idx.order), dtype=np.int64)
        slot_dated = slot_pos < idx.dated_end[slot_parent]
        idx._slot_parent = slot_parent  # type: ignore[attr-defined]
        idx._slot_dated = slot_dated  # type: ignore[attr-defined]
    return idx._slot_parent, idx._slot_dated  # type: ignore[attr-defined]


def _multiarange(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offset = np.cumsum(lengths) - lengths
    within = np.arange(total, dtype=np.int64) - np.repeat(offset, lengths)
    return np.repeat(starts, lengths) + within


@dataclass
class Gather:
    """Children gathered for a batch of parents: CSR slot positions plus the
    local segment (parent) id of every slot."""

    idx: EdgeIndex
    pos: np.ndarray  # CSR slot positions, per-segment ascending
    seg: np.ndarray  # local parent index aligned with pos
    n_seg: int

    @property
    def child_rows(self) -> np.ndarray:
        return self.idx.order[self.pos]

    @property
    def times(self) -> np.ndarray:
        return self.idx.times[self.pos]

    def dated_mask(self, parents: Optional[np.ndarray]) -> np.ndarray:
        parent_rows = self.seg if parents is None else parents[self.seg]
        return self.pos < self.idx.dated_end[parent_rows]

    def keep(self, mask: np.ndarray) -> "Gather":
        return Gather(self.idx, self.pos[mask], self.seg[mask], self.n_seg)


def gather_children(
    ctx: VecCtx,
    agg: BoundAggregation,
    parents: Optional[np.ndarray],
    anchor: Optional[int],
) -> Gather:
    """Collect child slots for each parent (None = every row of the parent
    table). Windowed gathers slice the dated prefix; unwindowed gathers take
    every child, undated included."""
    idx = ctx.g.edge_index(agg.group_edge)
    windowed = agg.window is not None
    if windowed:
        assert anchor is not None
        start = agg.window.start_micros
        lo = None if start is None else anchor + start
        hi = anchor + agg.window.end_micros

    if parents is None or ctx.fullscan:
        slot_parent, slot_dated = _edge_slot_arrays(idx)
        if windowed:
            mask = slot_dated.copy()
            if lo is not None:
                mask &= idx.times >= lo
            mask &= idx.times < hi
        else:
            mask = np.ones(len(idx.order), dtype=np.bool_)
        pos = np.nonzero(mask)[0]
        seg = slot_parent[pos]
        n_parent = len(idx.indptr) - 1
        if parents is None:
            return Gather(idx, pos, seg, n_parent)
        # Remap global parent rows onto the requested selection.
        local = np.full(n_parent, -1, dtype=np.int64)
        local[parents] = np.arange(len(parents), dtype=np.int64)
        seg_local = local[seg]
        inside = seg_local >= 0
        return Gather(idx, pos[inside], seg_local[inside], len(parents))

    # Restricted: pull the selected parents' (dated) child slices in one
    # vectorized pass, then mask by the window. Work scales with the
    # selected parents' children, never with the table.
    starts = idx.indptr[parents]
    ends = idx.dated_end[parents] if windowed else idx.indptr[parents + 1]
    lengths = ends - starts
    pos = _multiarange(starts, lengths)
    seg = np.repeat(np.arange(len(parents), dtype=np.int64), lengths)
    if windowed and len(pos):
        t = idx.times[pos]
        mask = t < hi
        if lo is not None:
            mask &= t >= lo
        pos, seg = pos[mask], seg[mask]
    return Gather(idx, pos, seg, len(parents))


# ---------------------------------------------------------------------------
# Column fetch


def fetch_rows(
    ctx: VecCtx, bc: BoundColumn, rows: Optional[np.ndarray]
) -> Tuple[np.ndarray, np.ndarray]:
    """Values and null mask of a bound column for a batch of base rows
    (None = every row of the base table), walking child-to-parent hops; an
    unresolvable hop yields null."""
    cur = rows
    null: Optional[np.ndarray] = None
    for edge in bc.hops:
        fwd = ctx.g.edge_index(edge).forward
        nxt = fwd if cur is None else fwd[cur]
        bad = nxt < 0
        null = bad if null is None else (null | bad)
        cur = np.where(bad, 0, nxt)
    col = ctx.db.table(bc.table).column(bc.column)
    if cur is None:
        return col.values, col.null if null is None else (null | col.null)
    if len(cur):
        vals = col.values[cur]
        null = col.null[cur] if null is None else (null | col.null[cur])
    else:
        vals = col.values[:0]
        null = np.zeros(0, dtype=np.bool_)
    return vals, null


# ---------------------------------------------------------------------------
# Comparison / condition kernels


def _string_loop(vals, null, fn) -> np.ndarray:
    out = np.fromiter(
        (False if n else fn(v) for v, n in zip(vals, null)), dtype=np.bool_, count=len(vals)
    )
    return out


def eval_compare_vec(
    ctx: VecCtx, cmp: BoundCompare, table: str, rows: np.ndarray, anchor: Optional[int]
) -> np.ndarray:
    if isinstance(cmp.lhs, BoundAggregation):
        vals, defined = eval_agg_vec(ctx, cmp.lhs, table, rows, anchor)
        null = ~defined
    else:
        vals, null = fetch_rows(ctx, cmp.lhs, rows)

    op, rhs = cmp.op, cmp.rhs
    if op is RelOp.IS:
        return null.copy()
    if op is RelOp.IS_NOT:
        return ~null

    ok = ~null
    if len(vals) == 0:
        return np.zeros(0, dtype=np.bool_)

    if op in (RelOp.IN, RelOp.IS_IN):
        members = [e.value for e in rhs.value]
        if vals.dtype == object:
            mset = set(members)
            return _string_loop(vals, null, lambda v: v in mset)
        if not members:
            return np.zeros(len(vals), dtype=np.bool_)
        return np.isin(vals, np.array(members)) & ok

    if op in (RelOp.LIKE, RelOp.NOT_LIKE):
        pat = ctx.regexes.get(id(cmp))
        if pat is None:
            pat = like_regex(rhs.value)
            ctx.regexes[id(cmp)] = pat
        hit = _string_loop(vals, null, lambda v: pat.fullmatch(v) is not None)
        return hit if op is RelOp.LIKE else (~hit & ok)
    if op in (RelOp.CONTAINS, RelOp.NOT_CONTAINS):
        needle = rhs.value
        hit = _string_loop(vals, null, lambda v: needle in v)
        return hit if op is RelOp.CONTAINS else (~hit & ok)
    if op is RelOp.STARTS_WITH:
        return _string_loop(vals, null, lambda v: v.startswith(rhs.value))
    if op is RelOp.ENDS_WITH:
        return _string_loop(vals, null, lambda v: v.endswith(rhs.value))

    const = rhs.value
    if vals.dtype == object:
        if op is RelOp.EQ:
            return _string_loop(vals, null, lambda v: v == const)
        if op is RelOp.NE:
            return _string_loop(vals, null, lambda v: v != const)
        raise AssertionError(f"unexpected op {op} on object column")
    if op is RelOp.EQ:
        return (vals == const) & ok
    if op is RelOp.NE:
        return (vals != const) & ok
    if op is RelOp.LT:
        return (vals < const) & ok
    if op is RelOp.LE:
        return (vals <= const) & ok
    if op is RelOp.GT:
        return (vals > const) & ok
    if op is RelOp.GE:
        return (vals >= const) & ok
    raise AssertionError(op)


def eval_condition_vec(
    ctx: VecCtx, cond: BoundCondition, table: str, rows: np.ndarray, anchor: Optional[int]
) -> np.ndarray:
    if isinstance(cond, BoundCompare):
        return eval_compare_vec(ctx, cond, table, rows, anchor)
    if isinstance(cond, BoundNot):
        return ~eval_condition_vec(ctx, cond.operand, table, rows, anchor)
    if isinstance(cond, BoundAnd):
        return eval_condition_vec(ctx, cond.left, table, rows, anchor) & eval_condition_vec(
            ctx, cond.right, table, rows, anchor
        )
    if isinstance(cond, BoundOr):
        return eval_condition_vec(ctx, cond.left, table, rows, anchor) | eval_condition_vec(
            ctx, cond.right, table, rows, anchor
        )
    raise AssertionError(type(cond))


# ---------------------------------------------------------------------------
# Aggregation kernels


def eval_agg_vec(
    ctx: VecCtx,
    agg: BoundAggregation,
    table: str,
    rows: Optional[np.ndarray],
    anchor: Optional[int],
) -> Tuple[np.ndarray, np.ndarray]:
    """Aggregate values per base row. Returns (values, defined)."""
    gathered = gather_children(ctx, agg, rows, anchor)
    if agg.where is not None:
        keep = eval_condition_vec(ctx, agg.where, agg.table, gathered.child_rows, anchor)
        gathered = gathered.keep(keep)
    return _fold(ctx, agg, gathered, rows)


def _fold(ctx: VecCtx, agg: BoundAggregation, gth: Gather, parents) -> Tuple[np.ndarray, np.ndarray]:
    n = gth.n_seg
    kind = agg.kind
    seg = gth.seg

    if kind is AggKind.COUNT:
        counts = np.bincount(seg, minlength=n).astype(np.int64)
        return counts, np.ones(n, dtype=np.bool_)

    col = ctx.db.table(agg.table).column(agg.column)
    child_rows = gth.child_rows
    vals = col.values[child_rows]
    null = col.null[child_rows]

    if kind in (AggKind.FIRST, AggKind.LAST):
        dated = gth.dated_mask(parents)
        big = _INT_MAX
        if kind is AggKind.FIRST:
            pick = np.full(n, big, dtype=np.int64)
            np.minimum.at(pick, seg[dated], gth.pos[dated])
        else:
            t_max = np.full(n, _INT_MIN, dtype=np.int64)
            np.maximum.at(t_max, seg[dated], gth.times[dated])
            tie = dated & (gth.times == t_max[seg])
            pick = np.full(n, big, dtype=np.int64)
            np.minimum.at(pick, seg[tie], gth.pos[tie])
        has = pick < big
        if len(gth.idx.order) == 0:
            empty = np.zeros(n, dtype=col.values.dtype)
            return empty, np.zeros(n, dtype=np.bool_)
        picked_rows = gth.idx.order[np.where(has, pick, 0)]
        out_vals = col.values[picked_rows]
        out_null = col.null[picked_rows] | ~has
        if col.values.dtype == object:
            out_vals = np.where(out_null, None, out_vals)
        return out_vals, ~out_null

    m = ~null
    if kind is AggKind.SUM:
        if col.dtype is DataType.INT64:
            out = np.zeros(n, dtype=np.int64)
            np.add.at(out, seg[m], vals[m])
        else:
            out = np.bincount(seg[m], weights=vals[m].astype(np.float64), minlength=n)
        defined = np.bincount(seg[m], minlength=n) > 0
        return out, defined

    if kind is AggKind.AVG:
        sums = np.bincount(seg[m], weights=vals[m].astype(np.float64), minlength=n)
        cnts = np.bincount(seg[m], minlength=n)
        defined = cnts > 0
        return sums / np.maximum(cnts, 1), defined

    if kind in (AggKind.MIN, AggKind.MAX):
        if col.dtype is DataType.FLOAT64:
            init = np.inf if kind is AggKind.MIN else -np.inf
            out = np.full(n, init, dtype=np.float64)
        else:
            out = np.full(n, _INT_MAX if kind is AggKind.MIN else _INT_MIN, dtype=np.int64)
        fn = np.minimum if kind is AggKind.MIN else np.maximum
        fn.at(out, seg[m], vals[m])
        defined = np.bincount(seg[m], minlength=n) > 0
        return out, defined

    if kind is AggKind.COUNT_DISTINCT:
        counts = _distinct_counts(seg[m], vals[m], n)
        return counts, np.ones(n, dtype=np.bool_)

    if kind is AggKind.LIST_DISTINCT:
        lists = _distinct_lists(seg[m], vals[m], n)
        return lists, np.ones(n, dtype=np.bool_)

    raise AssertionError(kind)


def _distinct_counts(seg: np.ndarray, vals: np.ndarray, n: int) -> np.ndarray:
    if len(seg) == 0:
        return np.zeros(n, dtype=np.int64)
    if vals.dtype == object:
        seen = set()
        counts = np.zeros(n, dtype=np.int64)
        for s, v in zip(seg, vals):
            if (s, v) not in seen:
                seen.add((s, v))
                counts[s] += 1
        return counts
    order = np.lexsort((vals, seg))
    s, v = seg[order], vals[order]
    first = np.ones(len(s), dtype=np.bool_)
    first[1:] = (s[1:] != s[:-1]) | (v[1:] != v[:-1])
    return np.bincount(s[first], minlength=n).astype(np.int64)


def _distinct_lists(seg: np.ndarray, vals: np.ndarray, n: int) -> np.ndarray:
    out = np.empty(n, dtype=object)
    if vals.dtype == object:
        acc = [set() for _ in range(n)]
        for s, v in zip(seg, vals):
            acc[s].add(v)
        for i in range(n):
            out[i] = tuple(sorted(acc[i]))
        return out
    if len(seg) == 0:
        out[:] = [() for _ in range(n)]
        return out
    order = np.lexsort((vals, seg))
    s, v = seg[order], vals[order]
    first = np.ones(len(s), dtype=np.bool_)
    first[1:] = (s[1:] != s[:-1]) | (v[1:] != v[:-1])
    s, v = s[first], v[first]
    bounds = np.searchsorted(s, np.arange(n + 1))
    vlist = v.tolist()
    for i in range(n):
        out[i] = tuple(vlist[bounds[i] : bounds[i + 1]])
    return out


# ---------------------------------------------------------------------------
# Target kernels


def _flag_leaves(cond: BoundCondition) -> list:
    """Raw column reads whose null makes a condition target undefined.

    Reads under IS / IS NOT are exempt (they interrogate null), and reads
    inside aggregation filters never escape the aggregation.
    """
    out = []

    def walk(n):
        if isinstance(n, BoundCompare):
            if isinstance(n.lhs, BoundColumn) and n.op not in NULL_OPS:
                out.append(n.lhs)
        elif isinstance(n, BoundNot):
            walk(n.operand)
        elif isinstance(n, (BoundAnd, BoundOr)):
            walk(n.left)
            walk(n.right)

    walk(cond)
    return out


def eval_target_vec(
    ctx: VecCtx, target: BoundTarget, table: str, rows: Optional[np.ndarray], anchor: Optional[int]
) -> Tuple[np.ndarray, np.ndarray]:
    """Target values and definedness for a batch of entity rows (None =
    every row of the entity table).

    A plain column target is undefined where the column is null; an
    aggregation target where the aggregate is undefined; a condition target
    where any raw column read feeding a comparison is null (the value the
    label should be computed from is missing, so the row is an imputation
    candidate, not a labelled example).
    """
    if isinstance(target, BoundColumn):
        vals, null = fetch_rows(ctx, target, rows)
        return vals, ~null
    if isinstance(target, BoundAggregation):
        return eval_agg_vec(ctx, target, table, rows, anchor)
    n = ctx.db.nrows(table) if rows is None else len(rows)
    flags = np.zeros(n, dtype=np.bool_)
    for leaf in _flag_leaves(target):
        _, null = fetch_rows(ctx, leaf, rows)
        flags = flags | null
    result = eval_condition_vec(ctx, target, table, rows, anchor)
    return result, ~flags
