"""Low-latency label computation via connected-subgraph collection.

Instead of scanning tables, this path walks the row graph from the
requested entities and collects exactly the rows the query can touch: each
aggregation contributes a time-sliced child expansion (all qualifying
neighbors, no fan-out cap), each filter column a chain of single-row parent
hops, nested aggregations recurse. The collected rows are materialized as a
small standalone database on which the scalar evaluator runs, so results
match the batch engine row for row.

Row order is preserved when slicing tables (selected indices stay sorted),
which keeps time-tie resolution identical to the full database.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .binder import (
    BoundAggregation,
    BoundQuery,
    HopChain,
    iter_bound_columns,
)
from .engine import TrainingTable, evaluate_pairs
from .errors import ExecutionError
from .splits import SplitPolicy
from .store import Column, Database, FkEdge, RowGraph, RowRef, TableData, build_row_graph


@dataclass(frozen=True)
class GatherNode:
    """One aggregation's child expansion: the edge to follow, its window
    (relative to the anchor), the parent-hop chains its filter reads, and
    the nested expansions below it."""

    edge: FkEdge
    window: Optional[Tuple[Optional[int], int]]  # (lo, hi) micros rel. anchor
    hop_chains: Tuple[HopChain, ...]
    nested: Tuple["GatherNode", ...]


@dataclass(frozen=True)
class SampleRequest:
    """Everything `collect` needs: the pairs plus the shape of the reads."""

    entity_table: str
    pairs: Tuple[Tuple[RowRef, Optional[int]], ...]
    entity_hops: Tuple[HopChain, ...]
    gathers: Tuple[GatherNode, ...]

    @property
    def required_edges(self) -> Set[FkEdge]:
        out: Set[FkEdge] = set()

        def walk(node: GatherNode):
            out.add(node.edge)
            for chain in node.hop_chains:
                out.update(chain)
            for sub in node.nested:
                walk(sub)

        for g in self.gathers:
            walk(g)
        for chain in self.entity_hops:
            out.update(chain)
        return out


def _gather_nodes(condition_or_agg) -> List[GatherNode]:
    """GatherNodes for every aggregation at the top level of a condition."""

    def from_agg(agg: BoundAggregation) -> GatherNode:
        window = None
        if agg.window is not None:
            window = (agg.window.start_micros, agg.window.end_micros)
        chains: List[HopChain] = []
        nested: List[GatherNode] = []
        if agg.where is not None:
            chains = [c.hops for c in iter_bound_columns(agg.where) if c.hops]
            nested = _gather_nodes(agg.where)
        return GatherNode(agg.group_edge, window, tuple(chains), tuple(nested))

    from .binder import BoundAnd, BoundCompare, BoundNot, BoundOr

    out: List[GatherNode] = []

    def walk(n):
        if isinstance(n, BoundAggregation):
            out.append(from_agg(n))
        elif isinstance(n, BoundCompare):
            walk(n.lhs)
        elif isinstance(n, BoundNot):
            walk(n.operand)
        elif isinstance(n, (BoundAnd, BoundOr)):
            walk(n.left)
            walk(n.right)

    if condition_or_agg is not None:
        walk(condition_or_agg)
    return out


def build_request(
    bound: BoundQuery, pairs: Sequence[Tuple[RowRef, Optional[int]]]
) -> SampleRequest:
    """Derive the sampling shape from a bound query: only the edges and
    windows the label computation and filters actually use."""
    gathers: List[GatherNode] = []
    entity_hops: List[HopChain] = []

    def entity_level(node):
        gathers.extend(_gather_nodes(node))
        entity_hops.extend(c.hops for c in iter_bound_columns(node) if c.hops)

    entity_level(bound.target)
    for conj in bound.conjuncts:
        entity_level(conj.condition)
    if bound.assuming is not None:
        entity_level(bound.assuming)

    return SampleRequest(
        entity_table=bound.entity_table,
        pairs=tuple((RowRef(r.table.upper(), r.index), a) for r, a in pairs),
        entity_hops=tuple(dict.fromkeys(entity_hops)),
        gathers=tuple(gathers),
    )


@dataclass
class Subgraph:
    """Per-table row index sets (sorted), closed under the request's
    hop/window specification and connected to the requested entities."""

    db: Database
    rows: Dict[str, np.ndarray]
    touched_rows: int = 0
    _sub: Optional[Database] = field(default=None, repr=False)
    _maps: Optional[Dict[str, Dict[int, int]]] = field(default=None, repr=False)

    def row_count(self, table: str) -> int:
        arr = self.rows.get(table.upper())
        return 0 if arr is None else len(arr)


def _gather_rows(
    g: RowGraph,
    edge: FkEdge,
    parents: np.ndarray,
    anchor: Optional[int],
    window: Optional[Tuple[Optional[int], int]],
) -> np.ndarray:
    """Child rows of `parents` along `edge`, window-sliced; vectorized."""
    from .kernels import _multiarange

    idx = g.edge_index(edge)
    starts = idx.indptr[parents]
    ends = idx.indptr[parents + 1] if window is None else idx.dated_end[parents]
    pos = _multiarange(starts, ends - starts)
    if window is not None and len(pos):
        if anchor is None:
            raise ExecutionError("windowed gather requires an anchor")
        lo_rel, hi_rel = window
        t = idx.times[pos]
        mask = t < anchor + hi_rel
        if lo_rel is not None:
            mask &= t >= anchor + lo_rel
        pos = pos[mask]
    return idx.order[pos]


def collect(g: RowGraph, request: SampleRequest) -> Subgraph:
    """Breadth-first collection of the connected row subgraph the request
    touches: child expansions are time-sliced per window (every qualifying
    neighbor, no fan-out cap), parent hops pull single rows unconditionally.
    Pairs sharing an anchor expand together, one array pass per edge."""
    db = g.db
    acc: Dict[str, List[np.ndarray]] = {}

    def add(table: str, rows: np.ndarray):
        if len(rows):
            acc.setdefault(table, []).append(rows)

    def walk_chain(table: str, rows: np.ndarray, chain: HopChain):
        cur = rows
        for edge in chain:
            fwd = g.edge_index(edge).forward
            cur = fwd[cur]
            cur = cur[cur >= 0]
            add(edge.parent_table, cur)

    def expand(node: GatherNode, base_rows: np.ndarray, anchor: Optional[int]):
        children = _gather_rows(g, node.edge, base_rows, anchor, node.window)
        add(node.edge.child_table, children)
        if len(children):
            for chain in node.hop_chains:
                walk_chain(node.edge.child_table, children, chain)
            for sub in node.nested:
                expand(sub, children, anchor)

    by_anchor: Dict[Optional[int], List[int]] = {}
    for ref, anchor in request.pairs:
        if ref.table.upper() != request.entity_table:
            raise ExecutionError(f"pair entity {ref} is not from {request.entity_table}")
        by_anchor.setdefault(anchor, []).append(ref.index)
    for anchor, indices in by_anchor.items():
        base = np.array(sorted(set(indices)), dtype=np.int64)
        add(request.entity_table, base)
        for chain in request.entity_hops:
            walk_chain(request.entity_table, base, chain)
        for node in request.gathers:
            expand(node, base, anchor)

    packed = {t: np.unique(np.concatenate(arrays)) for t, arrays in acc.items()}
    touched = sum(len(v) for v in packed.values())
    return Subgraph(db, packed, touched)


def _sub_database(sub: Subgraph) -> Tuple[Database, Dict[str, Dict[int, int]]]:
    if sub._sub is not None:
        return sub._sub, sub._maps
    db = sub.db
    out = Database(db.schema)
    maps: Dict[str, Dict[int, int]] = {}
    for name, tdata in db.tables.items():
        idx = sub.rows.get(name, np.empty(0, dtype=np.int64))
        cols = {
            cname: Column(col.dtype, col.values[idx], col.null[idx])
            for cname, col in tdata.columns.items()
        }
        new = TableData(tdata.definition, cols, len(idx))
        if tdata.definition.primary_key:
            pkcol = new.columns[tdata.definition.primary_key]
            new.pk_index = dict(zip(pkcol.values.tolist(), range(len(idx))))
        out.tables[name] = new
        maps[name] = dict(zip(idx.tolist(), range(len(idx))))
    sub._sub, sub._maps = out, maps
    return out, maps


def compute_on_subgraph(
    bound: BoundQuery,
    sub: Subgraph,
    pairs: Sequence[Tuple[RowRef, Optional[int]]],
    *,
    anchors_for_split: Optional[Sequence[int]] = None,
    split: Optional[SplitPolicy] = None,
    keep_empty_labels: Optional[bool] = None,
) -> TrainingTable:
    """Run the scalar evaluator over the collected rows only; emits exactly
    the batch engine's rows for the same pairs."""
    sub_db, maps = _sub_database(sub)
    emap = maps.get(bound.entity_table, {})
    remapped = []
    for ref, anchor in pairs:
        local = emap.get(ref.index)
        if local is None:
            raise ExecutionError(
                f"entity row {ref} was not collected; build the request from the same pairs"
            )
        remapped.append((RowRef(bound.entity_table, local), anchor))
    return evaluate_pairs(
        sub_db,
        build_row_graph(sub_db),
        bound,
        remapped,
        anchors_for_split=anchors_for_split,
        split=split,
        keep_empty_labels=keep_empty_labels,
    )


def sample_pairs(
    db: Database,
    g: RowGraph,
    bound: BoundQuery,
    n: int,
    *,
    anchor: Optional[int] = None,
) -> List[Tuple[RowRef, Optional[int]]]:
    """Default context selection: the `n` most recently active entities at
    the latest feasible anchor (ties by entity key). Activity is the newest
    child event strictly before the anchor across the query's child edges.
    """
    etable = bound.entity_table
    n_entities = db.nrows(etable)
    if bound.is_static:
        sel = range(min(n, n_entities))
        return [(RowRef(etable, i), None) for i in sel]
    if anchor is None:
        max_t = db.max_event_time()
        if max_t is None:
            raise ExecutionError("temporal query over a database with no dated rows")
        anchor = max_t - bound.timeframe.future
    latest = np.full(n_entities, np.iinfo(np.int64).min, dtype=np.int64)
    edges = {a.group_edge for a in _request_edges(bound) if a.group_edge.parent_table == etable}
    for edge in edges:
        idx = g.edge_index(edge)
        from .kernels import _edge_slot_arrays

        slot_parent, slot_dated = _edge_slot_arrays(idx)
        mask = slot_dated & (idx.times < anchor)
        np.maximum.at(latest, slot_parent[mask], idx.times[mask])
    active = np.nonzero(latest > np.iinfo(np.int64).min)[0]
    pk = db.table(etable).column(db.table(etable).definition.primary_key)
    ranked = sorted(active.tolist(), key=lambda i: (-int(latest[i]), pk.get(i)))
    return [(RowRef(etable, i), anchor) for i in ranked[:n]]


def _request_edges(bound: BoundQuery) -> List[BoundAggregation]:
    from .binder import iter_bound_aggregations

    aggs = list(iter_bound_aggregations(bound.target))
    for conj in bound.conjuncts:
        aggs.extend(iter_bound_aggregations(conj.condition))
    aggs.extend(iter_bound_aggregations(bound.assuming))
    return aggs
