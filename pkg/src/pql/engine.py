"""Batch execution engine.

Two halves live here:

* a scalar per-(entity, anchor) evaluator over the row graph — the
  reference semantics, also used by the subgraph sampler and by leakage
  instrumentation (it can record every row it consumes);
* the plan executor, which materializes training and prediction tables.
  Optimized plans run stage by stage with the restricted vectorized
  kernels; the unoptimized baseline materializes the full entity-anchor
  cross product and full-table scans, filtering last. Both produce
  identical tables.

Undefined values: aggregations over an empty (or all-null) set are
undefined for SUM/AVG/MIN/MAX/FIRST/LAST, zero for COUNT/COUNT_DISTINCT,
and an empty list for LIST_DISTINCT. A comparison against a null or
undefined operand is false (IS / IS NOT excepted). A target is undefined —
and its row dropped, counted — when a plain column target is null, an
aggregation target is undefined, or a raw column read feeding a condition
target is null.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .ast import AggKind, RelOp, NULL_OPS
from .binder import (
    BoundAggregation,
    BoundColumn,
    BoundCompare,
    BoundCondition,
    BoundNot,
    BoundAnd,
    BoundOr,
    BoundQuery,
    BoundTarget,
    TaskType,
)
from .errors import ExecutionError
from .kernels import (
    VecCtx,
    eval_condition_vec,
    eval_target_vec,
    like_regex,
)
from .planner import LogicalPlan, resolve_anchors
from .splits import SplitPolicy, split_for_anchor_rank, split_for_key
from .store import Database, ListType, RowGraph, RowRef, build_row_graph
from .times import format_timestamp


# ---------------------------------------------------------------------------
# Touch recording (leakage instrumentation / sampler verification)


@dataclass
class TouchRecorder:
    """Rows consumed during scalar evaluation.

    `window_rows` holds rows gathered by aggregation windows (these are the
    time-scoped reads the leakage invariants constrain); `touched` holds
    every consumed row including attribute reads resolved through FK hops.
    """

    touched: Set[RowRef] = field(default_factory=set)
    window_rows: Set[RowRef] = field(default_factory=set)

    def record(self, ref: RowRef):
        self.touched.add(ref)

    def record_window(self, refs):
        for r in refs:
            self.window_rows.add(r)
            self.touched.add(r)


class _PairCtx:
    __slots__ = ("db", "g", "recorder", "regexes")

    def __init__(self, db: Database, g: RowGraph, recorder: Optional[TouchRecorder] = None):
        self.db = db
        self.g = g
        self.recorder = recorder
        self.regexes: Dict[int, object] = {}


# ---------------------------------------------------------------------------
# Scalar evaluation


def _fetch_scalar(ctx: _PairCtx, bc: BoundColumn, row: RowRef):
    cur = row
    for edge in bc.hops:
        parent = ctx.g.parent_of(edge, cur.index)
        if parent is None:
            return None
        cur = RowRef(edge.parent_table, parent)
        if ctx.recorder:
            ctx.recorder.record(cur)
    if ctx.recorder:
        ctx.recorder.record(cur)
    return ctx.db.value(cur, bc.column)


def _compare_scalar(ctx: _PairCtx, cmp: BoundCompare, value) -> bool:
    op, rhs = cmp.op, cmp.rhs
    if op is RelOp.IS:
        return value is None
    if op is RelOp.IS_NOT:
        return value is not None
    if value is None:
        return False
    const = rhs.value
    if op is RelOp.EQ:
        return value == const
    if op is RelOp.NE:
        return value != const
    if op is RelOp.LT:
        return value < const
    if op is RelOp.LE:
        return value <= const
    if op is RelOp.GT:
        return value > const
    if op is RelOp.GE:
        return value >= const
    if op in (RelOp.IN, RelOp.IS_IN):
        return any(value == e.value for e in const)
    if op in (RelOp.LIKE, RelOp.NOT_LIKE):
        pat = ctx.regexes.get(id(cmp))
        if pat is None:
            pat = like_regex(const)
            ctx.regexes[id(cmp)] = pat
        hit = pat.fullmatch(value) is not None
        return hit if op is RelOp.LIKE else not hit
    if op is RelOp.CONTAINS:
        return const in value
    if op is RelOp.NOT_CONTAINS:
        return const not in value
    if op is RelOp.STARTS_WITH:
        return value.startswith(const)
    if op is RelOp.ENDS_WITH:
        return value.endswith(const)
    raise AssertionError(op)


def _eval_condition(ctx: _PairCtx, cond: BoundCondition, row: RowRef, anchor, nullflag=None) -> bool:
    # Both branches of a connective are always evaluated so that the set of
    # rows a query touches is deterministic (the sampler relies on it).
    if isinstance(cond, BoundCompare):
        if isinstance(cond.lhs, BoundAggregation):
            value = _eval_aggregation(ctx, cond.lhs, row, anchor)
        else:
            value = _fetch_scalar(ctx, cond.lhs, row)
            if nullflag is not None and value is None and cond.op not in NULL_OPS:
                nullflag[0] = True
        return _compare_scalar(ctx, cond, value)
    if isinstance(cond, BoundNot):
        return not _eval_condition(ctx, cond.operand, row, anchor, nullflag)
    if isinstance(cond, BoundAnd):
        left = _eval_condition(ctx, cond.left, row, anchor, nullflag)
        right = _eval_condition(ctx, cond.right, row, anchor, nullflag)
        return left and right
    if isinstance(cond, BoundOr):
        left = _eval_condition(ctx, cond.left, row, anchor, nullflag)
        right = _eval_condition(ctx, cond.right, row, anchor, nullflag)
        return left or right
    raise AssertionError(type(cond))


def _gather_scalar(ctx: _PairCtx, agg: BoundAggregation, base: RowRef, anchor) -> List[RowRef]:
    parent = RowRef(agg.group_edge.parent_table, base.index)
    if agg.window is not None:
        start = agg.window.start_micros
        lo = None if start is None else anchor + start
        hi = anchor + agg.window.end_micros
        children = ctx.g.children_in_window(parent, agg.group_edge, lo, hi)
    else:
        children = ctx.g.all_children(parent, agg.group_edge)
    if ctx.recorder:
        ctx.recorder.record_window(children)
    return children


def _eval_aggregation(ctx: _PairCtx, agg: BoundAggregation, base: RowRef, anchor):
    if (anchor is None) == (agg.window is not None):
        raise ExecutionError(
            f"{agg.kind.value} over {agg.table}: anchor must be supplied exactly "
            f"when the aggregation is windowed"
        )
    children = _gather_scalar(ctx, agg, base, anchor)
    if agg.where is not None:
        children = [c for c in children if _eval_condition(ctx, agg.where, c, anchor)]
    kind = agg.kind
    if kind is AggKind.COUNT:
        return len(children)

    column = agg.column
    values = [ctx.db.value(c, column) for c in children]
    if kind is AggKind.COUNT_DISTINCT:
        return len({v for v in values if v is not None})
    if kind is AggKind.LIST_DISTINCT:
        return tuple(sorted({v for v in values if v is not None}))
    if kind in (AggKind.FIRST, AggKind.LAST):
        time_col = ctx.db.table(agg.table).definition.time_column
        dated = [(c, v) for c, v in zip(children, values) if ctx.db.value(c, time_col) is not None]
        if not dated:
            return None
        if kind is AggKind.FIRST:
            return dated[0][1]
        last_time = ctx.db.value(dated[-1][0], time_col)
        for c, v in dated:  # ties resolve to the lowest row index (load order)
            if ctx.db.value(c, time_col) == last_time:
                return v
        raise AssertionError("unreachable")
    present = [v for v in values if v is not None]
    if not present:
        return None
    if kind is AggKind.SUM:
        return sum(present)
    if kind is AggKind.AVG:
        return float(sum(present)) / len(present)
    if kind is AggKind.MIN:
        return min(present)
    if kind is AggKind.MAX:
        return max(present)
    raise AssertionError(kind)


def _eval_target(ctx: _PairCtx, target: BoundTarget, row: RowRef, anchor) -> Tuple[object, bool]:
    """(value, defined) for one entity row."""
    if isinstance(target, BoundColumn):
        v = _fetch_scalar(ctx, target, row)
        return v, v is not None
    if isinstance(target, BoundAggregation):
        v = _eval_aggregation(ctx, target, row, anchor)
        if target.kind is AggKind.LIST_DISTINCT:
            return v, True
        return v, v is not None
    flag = [False]
    value = _eval_condition(ctx, target, row, anchor, nullflag=flag)
    return value, not flag[0]


# Public scalar operations (reference semantics, one pair at a time).


def eval_aggregation(db: Database, g: RowGraph, agg: BoundAggregation, entity: RowRef, anchor=None):
    """Aggregate one entity's children; `anchor` required iff windowed."""
    return _eval_aggregation(_PairCtx(db, g), agg, entity, anchor)


def eval_condition(db: Database, g: RowGraph, cond: BoundCondition, row: RowRef, anchor=None) -> bool:
    """Two-valued condition evaluation for one row."""
    return _eval_condition(_PairCtx(db, g), cond, row, anchor)


# ---------------------------------------------------------------------------
# Output tables


@dataclass
class TrainingTable:
    columns: Tuple[str, ...]
    rows: List[Tuple]  # (entity_key, anchor_micros | None, target, split)
    metadata: dict

    @property
    def row_count(self) -> int:
        return len(self.rows)


@dataclass
class PredictionTable:
    columns: Tuple[str, ...]
    rows: List[Tuple]  # (entity_key, anchor_micros | None)
    candidates: Optional[List] = None
    metadata: dict = field(default_factory=dict)


def _sort_rows(rows: List[Tuple], temporal: bool) -> List[Tuple]:
    # Canonical output order: anchor descending, then entity key ascending.
    if temporal:
        return sorted(rows, key=lambda r: (-r[1], r[0]))
    return sorted(rows, key=lambda r: r[0])


def _drop_empty_labels(task, keep_empty_labels: Optional[bool]) -> bool:
    if keep_empty_labels is not None:
        return not keep_empty_labels
    # Ranking needs positive links; multilabel admits all-negative rows.
    return task.task_type is TaskType.LINK_PREDICTION


def _is_list_target(bound: BoundQuery) -> bool:
    return isinstance(bound.task.target_dtype, ListType)


# ---------------------------------------------------------------------------
# Shared assembly helpers


@dataclass
class _Drops:
    validity: int = 0
    static_filter: int = 0
    temporal_filter: int = 0
    assuming: int = 0
    undefined_target: int = 0
    empty_label: int = 0

    def to_json(self) -> dict:
        return {
            "validity_pruned": self.validity,
            "static_filtered": self.static_filter,
            "temporal_filtered": self.temporal_filter,
            "assuming_filtered": self.assuming,
            "undefined_target": self.undefined_target,
            "empty_label": self.empty_label,
        }

    def total(self) -> int:
        return (
            self.validity
            + self.static_filter
            + self.temporal_filter
            + self.assuming
            + self.undefined_target
            + self.empty_label
        )


def _validity_mask(
    ctx: VecCtx, bound: BoundQuery, sel: Optional[np.ndarray], anchor: int
) -> np.ndarray:
    start_col, end_col = bound.entity_validity
    table = ctx.db.table(bound.entity_table)
    n = table.nrows if sel is None else len(sel)
    mask = np.ones(n, dtype=np.bool_)
    if start_col is not None:
        col = table.column(start_col)
        vals = col.values if sel is None else col.values[sel]
        null = col.null if sel is None else col.null[sel]
        mask &= null | (vals <= anchor)
    if end_col is not None:
        col = table.column(end_col)
        vals = col.values if sel is None else col.values[sel]
        null = col.null if sel is None else col.null[sel]
        mask &= null | (anchor < vals)
    return mask


def _target_keep(
    ctx: VecCtx,
    bound: BoundQuery,
    sel: np.ndarray,
    anchor: Optional[int],
    drop_empty: bool,
    drops: _Drops,
):
    """Evaluate targets over `sel`; returns (kept sel, kept value array)."""
    values, defined = eval_target_vec(ctx, bound.target, bound.entity_table, sel, anchor)
    if _is_list_target(bound):
        empty = np.fromiter((len(v) == 0 for v in values), np.bool_, count=len(values))
        if drop_empty:
            keep = ~empty
            drops.empty_label += int(empty.sum())
        else:
            keep = np.ones(len(sel), dtype=np.bool_)
    else:
        keep = defined
        drops.undefined_target += int(len(sel) - keep.sum())
    return sel[keep], values[keep]


def _assemble(
    ctx: VecCtx,
    bound: BoundQuery,
    sel: np.ndarray,
    values: np.ndarray,
    anchor,
    split_name: Optional[str],
    split_policy: Optional[SplitPolicy] = None,
) -> List[Tuple]:
    """Rows for one anchor block, sorted by entity key (keys are unique per
    block, and blocks are produced newest-anchor-first, so concatenated
    blocks come out in canonical order with no global sort)."""
    keys = ctx.db.table(bound.entity_table).column(bound.entity_column).values[sel]
    order = np.argsort(keys, kind="stable")
    keys_l = keys[order].tolist()
    vals_l = values[order].tolist() if len(values) else []
    if split_name is None:  # static split hashes each key
        return [(k, anchor, v, split_for_key(k, split_policy)) for k, v in zip(keys_l, vals_l)]
    return [(k, anchor, v, split_name) for k, v in zip(keys_l, vals_l)]


# ---------------------------------------------------------------------------
# Training materialization


def materialize_training(
    plan: LogicalPlan,
    db: Database,
    g: Optional[RowGraph] = None,
    *,
    split: Optional[SplitPolicy] = None,
    workers: int = 1,
    keep_empty_labels: Optional[bool] = None,
) -> TrainingTable:
    """Execute a training plan, producing the canonical sorted table."""
    if plan.mode != "training":
        raise ExecutionError("materialize_training needs a training-mode plan")
    bound = plan.bound
    g = g or build_row_graph(db)
    split = split or SplitPolicy()
    ctx = VecCtx(db, g)
    drop_empty = _drop_empty_labels(bound.task, keep_empty_labels)
    drops = _Drops()

    n_entities = db.nrows(bound.entity_table)
    all_rows = np.arange(n_entities, dtype=np.int64)

    anchors: List[int] = []
    if not bound.is_static:
        anchors = resolve_anchors(bound, plan.policy, db)
        if not anchors:
            raise ExecutionError(
                "no feasible anchors: the data span is shorter than one anchor stride"
            )
    anchor_rank = {a: i for i, a in enumerate(sorted(anchors, reverse=True))}

    if plan.optimized:
        survivors = all_rows
        for cond in bound.static_conjuncts:
            if len(survivors) == 0:
                break
            mask = eval_condition_vec(ctx, cond, bound.entity_table, survivors, None)
            survivors = survivors[mask]
        pairs_expanded = len(survivors) if bound.is_static else len(survivors) * len(anchors)
        if bound.is_static:
            sel, values = _target_keep(ctx, bound, survivors, None, drop_empty, drops)
            rows = _assemble(ctx, bound, sel, values, None, None, split)
        else:

            def run_anchor(anchor: int):
                local = _Drops()
                sel = survivors
                if bound.entity_validity is not None and len(sel):
                    mask = _validity_mask(ctx, bound, sel, anchor)
                    local.validity += int(len(sel) - mask.sum())
                    sel = sel[mask]
                for cond in bound.temporal_conjuncts:
                    if len(sel) == 0:
                        break
                    mask = eval_condition_vec(ctx, cond, bound.entity_table, sel, anchor)
                    local.temporal_filter += int(len(sel) - mask.sum())
                    sel = sel[mask]
                if bound.assuming is not None and len(sel):
                    mask = eval_condition_vec(ctx, bound.assuming, bound.entity_table, sel, anchor)
                    local.assuming += int(len(sel) - mask.sum())
                    sel = sel[mask]
                sel, values = _target_keep(ctx, bound, sel, anchor, drop_empty, local)
                split_name = split_for_anchor_rank(anchor_rank[anchor])
                return _assemble(ctx, bound, sel, values, anchor, split_name), local

            rows = []
            for partial, local in _map_anchors(run_anchor, anchors, workers):
                rows.extend(partial)
                _merge_drops(drops, local)
    else:
        # Baseline: full cross product, targets for everything, filters last.
        rows, pairs_expanded = _run_naive(
            ctx, bound, all_rows, anchors, anchor_rank, split, drop_empty, drops, workers
        )
    split_counts: Dict[str, int] = {}
    for r in rows:
        split_counts[r[3]] = split_counts.get(r[3], 0) + 1
    metadata = {
        "mode": "training",
        "strategy": "staged" if plan.optimized else "cross_product",
        "task": bound.task.to_json(),
        "timeframe": bound.timeframe.to_json(),
        "entity_table": bound.entity_table,
        "entity_column": bound.entity_column,
        "anchors": [format_timestamp(a) for a in sorted(anchors, reverse=True)],
        "entities_scanned": n_entities,
        "pairs_expanded": pairs_expanded,
        "row_count": len(rows),
        "split_counts": split_counts,
        "dropped": drops.to_json(),
        "split_policy": {"train": split.train, "val": split.val, "test": split.test, "seed": split.seed},
    }
    columns = ("ENTITY",) + (() if bound.is_static else ("TIMESTAMP",)) + ("TARGET", "SPLIT")
    return TrainingTable(columns, rows, metadata)


def _merge_drops(total: _Drops, local: _Drops):
    total.validity += local.validity
    total.static_filter += local.static_filter
    total.temporal_filter += local.temporal_filter
    total.assuming += local.assuming
    total.undefined_target += local.undefined_target
    total.empty_label += local.empty_label


def _map_anchors(fn, anchors: List[int], workers: int):
    if workers <= 1 or len(anchors) <= 1:
        return [fn(a) for a in anchors]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, anchors))


def _run_naive(ctx, bound, all_rows, anchors, anchor_rank, split, drop_empty, drops, workers):
    """Cross-product execution: one full-table pass per anchor, targets first."""
    etable = bound.entity_table
    ctx.fullscan = True

    def run_anchor(anchor: Optional[int]):
        local = _Drops()
        # Target computation for every entity, before any filtering.
        values, defined = eval_target_vec(ctx, bound.target, etable, None, anchor)
        keep = np.ones(len(all_rows), dtype=np.bool_)
        kept = len(all_rows)

        def apply(mask, bucket):
            nonlocal keep, kept
            keep &= mask
            now = int(keep.sum())
            setattr(local, bucket, getattr(local, bucket) + kept - now)
            kept = now

        for cond in bound.static_conjuncts:
            apply(eval_condition_vec(ctx, cond, etable, None, None), "static_filter")
        if anchor is not None and bound.entity_validity is not None:
            apply(_validity_mask(ctx, bound, None, anchor), "validity")
        if anchor is not None:
            for cond in bound.temporal_conjuncts:
                apply(eval_condition_vec(ctx, cond, etable, None, anchor), "temporal_filter")
            if bound.assuming is not None:
                apply(eval_condition_vec(ctx, bound.assuming, etable, None, anchor), "assuming")
        if _is_list_target(bound):
            empty = np.fromiter((len(v) == 0 for v in values), np.bool_, count=len(values))
            if drop_empty:
                apply(~empty, "empty_label")
        else:
            apply(defined, "undefined_target")
        sel = np.nonzero(keep)[0]
        kept_vals = values[sel]
        if anchor is None:
            return _assemble(ctx, bound, sel, kept_vals, None, None, split), local
        split_name = split_for_anchor_rank(anchor_rank[anchor])
        return _assemble(ctx, bound, sel, kept_vals, anchor, split_name), local

    rows: List[Tuple] = []
    if bound.is_static:
        partial, local = run_anchor(None)
        rows.extend(partial)
        _merge_drops(drops, local)
        pairs = len(all_rows)
    else:
        for partial, local in _map_anchors(run_anchor, anchors, workers):
            rows.extend(partial)
            _merge_drops(drops, local)
        pairs = len(all_rows) * len(anchors)
    return rows, pairs


# ---------------------------------------------------------------------------
# Prediction materialization


def materialize_prediction(
    plan: LogicalPlan, db: Database, g: Optional[RowGraph] = None
) -> PredictionTable:
    """Execute a prediction plan: the entity set to predict for, with the
    candidate list for link tasks. ASSUMING never applies here."""
    if plan.mode != "prediction":
        raise ExecutionError("materialize_prediction needs a prediction-mode plan")
    bound = plan.bound
    g = g or build_row_graph(db)
    ctx = VecCtx(db, g)
    etable = bound.entity_table

    sel = np.arange(db.nrows(etable), dtype=np.int64)
    for cond in bound.static_conjuncts:
        if len(sel) == 0:
            break
        mask = eval_condition_vec(ctx, cond, etable, sel, None)
        sel = sel[mask]

    anchor: Optional[int] = None
    if not bound.is_static:
        anchor = plan.prediction_at
        if anchor is None:
            anchor = db.max_event_time()
            if anchor is None:
                raise ExecutionError("temporal query over a database with no dated rows")
        if bound.entity_validity is not None and len(sel):
            sel = sel[_validity_mask(ctx, bound, sel, anchor)]
        for cond in bound.temporal_conjuncts:
            if len(sel) == 0:
                break
            mask = eval_condition_vec(ctx, cond, etable, sel, anchor)
            sel = sel[mask]
    else:
        # Static tables predict exactly the entities whose label could not
        # be computed during training (their values are to be imputed).
        drop_empty = _drop_empty_labels(bound.task, None)
        values, defined = eval_target_vec(ctx, bound.target, etable, sel, None)
        if _is_list_target(bound):
            if drop_empty:
                empty = np.fromiter((len(v) == 0 for v in values), np.bool_, count=len(values))
                sel = sel[empty]
            else:
                sel = sel[:0]
        else:
            sel = sel[~defined]

    keys = db.table(bound.entity_table).column(bound.entity_column).values[sel].tolist()
    rows = _sort_rows([(k, anchor) for k in keys], temporal=False)

    candidates = None
    if bound.task.task_type is TaskType.LINK_PREDICTION:
        link_table = bound.task.link_target_table
        ltable = db.table(link_table)
        cand_sel = np.arange(ltable.nrows, dtype=np.int64)
        if bound.prediction_filter is not None and len(cand_sel):
            mask = eval_condition_vec(ctx, bound.prediction_filter, link_table, cand_sel, None)
            cand_sel = cand_sel[mask]
        pk = ltable.column(ltable.definition.primary_key)
        candidates = sorted(pk.values[cand_sel].tolist())

    metadata = {
        "mode": "prediction",
        "task": bound.task.to_json(),
        "timeframe": bound.timeframe.to_json(),
        "entity_table": bound.entity_table,
        "entity_column": bound.entity_column,
        "anchor": None if anchor is None else format_timestamp(anchor),
        "row_count": len(rows),
        "candidate_count": None if candidates is None else len(candidates),
    }
    columns = ("ENTITY",) if bound.is_static else ("ENTITY", "TIMESTAMP")
    return PredictionTable(columns, rows, candidates, metadata)


# ---------------------------------------------------------------------------
# Pairwise evaluation of explicit (entity, anchor) pairs


def evaluate_pairs(
    db: Database,
    g: RowGraph,
    bound: BoundQuery,
    pairs: Sequence[Tuple[RowRef, Optional[int]]],
    *,
    anchors_for_split: Optional[Sequence[int]] = None,
    split: Optional[SplitPolicy] = None,
    keep_empty_labels: Optional[bool] = None,
    recorder: Optional[TouchRecorder] = None,
) -> TrainingTable:
    """Scalar-path materialization restricted to the given pairs.

    Produces exactly the rows the batch engine would emit for those pairs:
    filters, validity pruning, drops and splits all apply. Used by the
    low-latency sampler and by the verification suites.
    """
    split = split or SplitPolicy()
    ctx = _PairCtx(db, g, recorder)
    drop_empty = _drop_empty_labels(bound.task, keep_empty_labels)
    pairs = list(dict.fromkeys(pairs))  # (entity, anchor) rows are unique
    if anchors_for_split is None:
        anchors_for_split = sorted({a for _, a in pairs if a is not None}, reverse=True)
    rank = {a: i for i, a in enumerate(sorted(anchors_for_split, reverse=True))}

    etable_def = db.table(bound.entity_table)
    pk_col = bound.entity_column
    rows: List[Tuple] = []
    drops = _Drops()
    for ref, anchor in pairs:
        if ref.table.upper() != bound.entity_table:
            raise ExecutionError(f"pair entity {ref} is not from {bound.entity_table}")
        if anchor is not None and bound.entity_validity is not None:
            if not _validity_ok(db, bound, ref, anchor):
                drops.validity += 1
                continue
        ok = True
        for cond in bound.static_conjuncts:
            if not _eval_condition(ctx, cond, ref, None):
                drops.static_filter += 1
                ok = False
                break
        if not ok:
            continue
        for cond in bound.temporal_conjuncts:
            if not _eval_condition(ctx, cond, ref, anchor):
                drops.temporal_filter += 1
                ok = False
                break
        if not ok:
            continue
        if bound.assuming is not None and not _eval_condition(ctx, bound.assuming, ref, anchor):
            drops.assuming += 1
            continue
        value, defined = _eval_target(ctx, bound.target, ref, anchor)
        if _is_list_target(bound):
            if drop_empty and len(value) == 0:
                drops.empty_label += 1
                continue
        elif not defined:
            drops.undefined_target += 1
            continue
        key = etable_def.column(pk_col).get(ref.index)
        if anchor is None:
            rows.append((key, None, value, split_for_key(key, split)))
        else:
            rows.append((key, anchor, value, split_for_anchor_rank(rank[anchor])))

    temporal = not bound.is_static
    rows = _sort_rows(rows, temporal)
    metadata = {
        "mode": "training",
        "strategy": "pairwise",
        "task": bound.task.to_json(),
        "pairs_expanded": len(pairs),
        "row_count": len(rows),
        "dropped": drops.to_json(),
    }
    columns = ("ENTITY",) + (() if bound.is_static else ("TIMESTAMP",)) + ("TARGET", "SPLIT")
    return TrainingTable(columns, rows, metadata)


def _validity_ok(db: Database, bound: BoundQuery, ref: RowRef, anchor: int) -> bool:
    start_col, end_col = bound.entity_validity
    if start_col is not None:
        v = db.value(ref, start_col)
        if v is not None and not (v <= anchor):
            return False
    if end_col is not None:
        v = db.value(ref, end_col)
        if v is not None and not (anchor < v):
            return False
    return True
