"""In-memory relational store.

Schema metadata, columnar table storage with null bitmaps, and a derived
row graph: one CSR adjacency per foreign-key edge, with each parent's
children sorted by their event time so that time windows slice by binary
search. Undated children sit after the dated ones in load order.

Identifiers are case-insensitive and canonicalized to upper case. A table's
time column and validity columns must hold timestamps (stored as integer
microseconds since epoch, UTC). Databases are immutable once loaded; the
row graph is built lazily and cached.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .errors import DataError, SchemaError
from .times import format_timestamp, parse_timestamp


class DataType(enum.Enum):
    INT64 = "int64"
    FLOAT64 = "float64"
    BOOL = "bool"
    STRING = "string"
    TIMESTAMP = "timestamp"


@dataclass(frozen=True)
class ListType:
    """List-of-scalar; appears only as a computed target type."""

    element: DataType

    def __str__(self) -> str:
        return f"list<{self.element.value}>"


class SemanticType(enum.Enum):
    NUMERICAL = "numerical"
    CATEGORICAL = "categorical"
    TEXT = "text"
    TEMPORAL = "temporal"
    KEY = "key"


_STYPE_DTYPES = {
    SemanticType.NUMERICAL: {DataType.INT64, DataType.FLOAT64},
    SemanticType.CATEGORICAL: {DataType.INT64, DataType.STRING, DataType.BOOL},
    SemanticType.TEXT: {DataType.STRING},
    SemanticType.TEMPORAL: {DataType.TIMESTAMP},
    SemanticType.KEY: {DataType.INT64, DataType.STRING},
}


@dataclass(frozen=True)
class ColumnDef:
    name: str
    dtype: DataType
    stype: SemanticType
    nullable: bool = True


@dataclass(frozen=True)
class ForeignKey:
    column: str
    references: str  # target table; the referenced column is its primary key


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: Tuple[ColumnDef, ...]
    primary_key: Optional[str] = None
    foreign_keys: Tuple[ForeignKey, ...] = ()
    time_column: Optional[str] = None
    validity: Optional[Tuple[Optional[str], Optional[str]]] = None

    def column(self, name: str) -> Optional[ColumnDef]:
        upper = name.upper()
        for col in self.columns:
            if col.name == upper:
                return col
        return None

    @property
    def column_names(self) -> Tuple[str, ...]:
        return tuple(c.name for c in self.columns)


class FkEdge(NamedTuple):
    """One foreign-key edge: child rows point at one parent row."""

    child_table: str
    fk_column: str
    parent_table: str

    def __str__(self) -> str:
        return f"{self.child_table}.{self.fk_column}->{self.parent_table}"


@dataclass(frozen=True)
class Schema:
    tables: Dict[str, TableDef]

    def table(self, name: str) -> TableDef:
        upper = name.upper()
        if upper not in self.tables:
            raise SchemaError(f"unknown table {name!r}")
        return self.tables[upper]

    def has_table(self, name: str) -> bool:
        return name.upper() in self.tables

    def edges(self) -> List[FkEdge]:
        out = []
        for t in self.tables.values():
            for fk in t.foreign_keys:
                out.append(FkEdge(t.name, fk.column, fk.references))
        return out

    def edges_from(self, child_table: str) -> List[FkEdge]:
        t = self.table(child_table)
        return [FkEdge(t.name, fk.column, fk.references) for fk in t.foreign_keys]

    def edges_into(self, parent_table: str) -> List[FkEdge]:
        upper = parent_table.upper()
        return [e for e in self.edges() if e.parent_table == upper]


class RowRef(NamedTuple):
    table: str
    index: int


# ---------------------------------------------------------------------------
# Schema loading


def _parse_column(raw: dict, table: str) -> ColumnDef:
    try:
        name = raw["name"].upper()
        dtype = DataType(raw["dtype"].lower())
        stype = SemanticType(raw["stype"].lower())
    except KeyError as exc:
        raise SchemaError(f"table {table}: column entry missing {exc}")
    except ValueError as exc:
        raise SchemaError(f"table {table}: {exc}")
    if dtype not in _STYPE_DTYPES[stype]:
        raise SchemaError(
            f"table {table}: column {name}: bad dtype/stype combination "
            f"({dtype.value}/{stype.value})"
        )
    return ColumnDef(name, dtype, stype, nullable=bool(raw.get("nullable", True)))


def load_schema(source: Union[str, dict, Path]) -> Schema:
    """Load and validate a schema from its JSON document (text, dict, or path)."""
    if isinstance(source, Path):
        source = source.read_text()
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"schema document is not valid JSON: {exc}")
    else:
        doc = source
    if not isinstance(doc, dict) or "tables" not in doc:
        raise SchemaError("schema document must be an object with a 'tables' list")

    tables: Dict[str, TableDef] = {}
    for raw in doc["tables"]:
        name = raw.get("name", "").upper()
        if not name:
            raise SchemaError("table entry missing 'name'")
        if name in tables:
            raise SchemaError(f"duplicate table {name}")
        columns = tuple(_parse_column(c, name) for c in raw.get("columns", []))
        seen = set()
        for col in columns:
            if col.name in seen:
                raise SchemaError(f"table {name}: duplicate column {col.name}")
            seen.add(col.name)

        tdef = TableDef(name, columns)

        def _col(cname: str, role: str) -> ColumnDef:
            found = tdef.column(cname)
            if found is None:
                raise SchemaError(f"table {name}: {role} column {cname!r} not defined")
            return found

        primary_key = None
        if raw.get("primary_key"):
            pk = _col(raw["primary_key"], "primary key")
            if pk.stype is not SemanticType.KEY:
                raise SchemaError(f"table {name}: primary key {pk.name} must have stype 'key'")
            primary_key = pk.name

        time_column = None
        if raw.get("time_column"):
            tc = _col(raw["time_column"], "time")
            if tc.dtype is not DataType.TIMESTAMP:
                raise SchemaError(f"table {name}: time column {tc.name} must be a timestamp")
            time_column = tc.name

        validity = None
        if raw.get("validity"):
            v = raw["validity"]
            start = v.get("start")
            end = v.get("end")
            if start is None and end is None:
                raise SchemaError(f"table {name}: validity needs a start or end column")
            for part in (start, end):
                if part is not None and _col(part, "validity").dtype is not DataType.TIMESTAMP:
                    raise SchemaError(f"table {name}: validity column {part} must be a timestamp")
            validity = (start.upper() if start else None, end.upper() if end else None)

        fks = []
        for rawfk in raw.get("foreign_keys", []):
            col = _col(rawfk["column"], "foreign key")
            if col.stype is not SemanticType.KEY:
                raise SchemaError(f"table {name}: foreign key {col.name} must have stype 'key'")
            fks.append(ForeignKey(col.name, rawfk["references"].upper()))

        tables[name] = TableDef(
            name,
            columns,
            primary_key=primary_key,
            foreign_keys=tuple(fks),
            time_column=time_column,
            validity=validity,
        )

    schema = Schema(tables)
    for t in tables.values():
        for fk in t.foreign_keys:
            if fk.references not in tables:
                raise SchemaError(
                    f"unresolved foreign key: {t.name}.{fk.column} references "
                    f"unknown table {fk.references}"
                )
            target = tables[fk.references]
            if target.primary_key is None:
                raise SchemaError(
                    f"foreign key {t.name}.{fk.column} targets {fk.references}, "
                    f"which has no primary key"
                )
            fkcol = t.column(fk.column)
            pkcol = target.column(target.primary_key)
            if fkcol.dtype is not pkcol.dtype:
                raise SchemaError(
                    f"foreign key {t.name}.{fk.column} ({fkcol.dtype.value}) does not "
                    f"match {fk.references}.{target.primary_key} ({pkcol.dtype.value})"
                )
    return schema


def schema_to_json(schema: Schema) -> dict:
    tables = []
    for t in schema.tables.values():
        raw = {
            "name": t.name,
            "columns": [
                {"name": c.name, "dtype": c.dtype.value, "stype": c.stype.value}
                for c in t.columns
            ],
        }
        if t.primary_key:
            raw["primary_key"] = t.primary_key
        if t.time_column:
            raw["time_column"] = t.time_column
        if t.validity:
            raw["validity"] = {
                k: v for k, v in zip(("start", "end"), t.validity) if v is not None
            }
        if t.foreign_keys:
            raw["foreign_keys"] = [
                {"column": fk.column, "references": fk.references} for fk in t.foreign_keys
            ]
        tables.append(raw)
    return {"tables": tables}


# ---------------------------------------------------------------------------
# Columnar data


@dataclass
class Column:
    dtype: DataType
    values: np.ndarray  # int64/float64/bool_/object; timestamps as int64 micros
    null: np.ndarray  # bool mask, True = null

    def get(self, i: int):
        if self.null[i]:
            return None
        v = self.values[i]
        if self.dtype is DataType.STRING:
            return v
        return v.item()

    def to_pylist(self) -> list:
        out = list(self.values)
        if self.dtype is not DataType.STRING:
            out = [v.item() for v in out]
        for i in np.nonzero(self.null)[0]:
            out[i] = None
        return out


_NUMPY_DTYPE = {
    DataType.INT64: np.int64,
    DataType.FLOAT64: np.float64,
    DataType.BOOL: np.bool_,
    DataType.STRING: object,
    DataType.TIMESTAMP: np.int64,
}


def _parse_cell(text: str, dtype: DataType):
    """Parse one CSV cell; '' means null. Returns None for null."""
    if text == "":
        return None
    if dtype is DataType.INT64:
        return int(text)
    if dtype is DataType.FLOAT64:
        v = float(text)
        return None if math.isnan(v) else v
    if dtype is DataType.BOOL:
        lowered = text.strip().lower()
        if lowered in ("true", "1", "t"):
            return True
        if lowered in ("false", "0", "f"):
            return False
        raise ValueError(f"not a bool: {text!r}")
    if dtype is DataType.TIMESTAMP:
        return parse_timestamp(text)
    return text


def _format_cell(value, dtype: DataType) -> str:
    if value is None:
        return ""
    if dtype is DataType.TIMESTAMP:
        return format_timestamp(value)
    if dtype is DataType.BOOL:
        return "true" if value else "false"
    if dtype is DataType.FLOAT64:
        return repr(float(value))
    return str(value)


@dataclass
class TableData:
    definition: TableDef
    columns: Dict[str, Column]
    nrows: int
    pk_index: Dict[object, int] = field(default_factory=dict)

    def column(self, name: str) -> Column:
        return self.columns[name.upper()]


@dataclass
class LoadReport:
    table: str
    rows: int
    dangling_fk: int = 0
    samples: List[str] = field(default_factory=list)


@dataclass
class Database:
    schema: Schema
    tables: Dict[str, TableData] = field(default_factory=dict)
    reports: List[LoadReport] = field(default_factory=list)
    _graph: Optional["RowGraph"] = field(default=None, repr=False)
    _time_range: Optional[tuple] = field(default=None, repr=False)

    def table(self, name: str) -> TableData:
        upper = name.upper()
        if upper not in self.tables:
            raise DataError(f"no data loaded for table {name}")
        return self.tables[upper]

    def nrows(self, name: str) -> int:
        upper = name.upper()
        return self.tables[upper].nrows if upper in self.tables else 0

    def total_rows(self) -> int:
        return sum(t.nrows for t in self.tables.values())

    def value(self, ref: RowRef, column: str):
        return self.table(ref.table).column(column).get(ref.index)

    def row_graph(self) -> "RowGraph":
        if self._graph is None:
            self._graph = build_row_graph(self)
        return self._graph

    def _event_time_range(self) -> tuple:
        # Cached; the database is immutable once loaded.
        if self._time_range is None:
            lo = hi = None
            for t in self.tables.values():
                tc = t.definition.time_column
                if tc is None or t.nrows == 0:
                    continue
                col = t.column(tc)
                dated = ~col.null
                if dated.any():
                    vals = col.values[dated]
                    a, b = int(vals.min()), int(vals.max())
                    lo = a if lo is None else min(lo, a)
                    hi = b if hi is None else max(hi, b)
            self._time_range = (lo, hi)
        return self._time_range

    def max_event_time(self) -> Optional[int]:
        """Latest value across all time columns, or None if no dated rows."""
        return self._event_time_range()[1]

    def min_event_time(self) -> Optional[int]:
        return self._event_time_range()[0]


def new_database(schema: Schema) -> Database:
    """Create an empty database; every table starts with zero rows."""
    db = Database(schema)
    for t in schema.tables.values():
        cols = {
            c.name: Column(
                c.dtype,
                np.empty(0, dtype=_NUMPY_DTYPE[c.dtype]),
                np.empty(0, dtype=np.bool_),
            )
            for c in t.columns
        }
        db.tables[t.name] = TableData(t, cols, 0)
    return db


def load_table_data(
    db: Database,
    table: str,
    rows: Union[str, Path, Iterable[str], io.TextIOBase],
    *,
    strict: bool = True,
) -> Database:
    """Load CSV rows (header required, '' = null) into `table`.

    In strict mode a foreign key value that does not resolve to a parent row
    is an error; in lenient mode the row is kept and counted in the report.
    Checks run against parents loaded so far, so load parent tables first.
    """
    tdef = db.schema.table(table)
    if isinstance(rows, Path):
        rows = rows.read_text().splitlines()
    elif isinstance(rows, str):
        rows = rows.splitlines()
    reader = csv.reader(rows)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"table {tdef.name}: empty input, header row required")
    header = [h.upper() for h in header]
    if sorted(header) != sorted(tdef.column_names):
        raise DataError(
            f"table {tdef.name}: header {header} does not match schema columns "
            f"{list(tdef.column_names)}"
        )

    raw: Dict[str, list] = {name: [] for name in tdef.column_names}
    nrows = 0
    for rownum, record in enumerate(reader, start=1):
        if len(record) != len(header):
            raise DataError(f"table {tdef.name}: row {rownum}: expected {len(header)} fields")
        for name, cell in zip(header, record):
            cdef = tdef.column(name)
            try:
                value = _parse_cell(cell, cdef.dtype)
            except (ValueError, OverflowError) as exc:
                raise DataError(f"table {tdef.name}: row {rownum}, column {name}: {exc}")
            if value is None and not cdef.nullable:
                raise DataError(f"table {tdef.name}: row {rownum}, column {name}: null not allowed")
            raw[name].append(value)
        nrows += 1

    columns: Dict[str, Column] = {}
    for cdef in tdef.columns:
        vals = raw[cdef.name]
        null = np.array([v is None for v in vals], dtype=np.bool_)
        if cdef.dtype is DataType.STRING:
            arr = np.array(vals, dtype=object)
        else:
            fill = 0 if cdef.dtype is not DataType.BOOL else False
            arr = np.array([fill if v is None else v for v in vals], dtype=_NUMPY_DTYPE[cdef.dtype])
        columns[cdef.name] = Column(cdef.dtype, arr, null)

    data = TableData(tdef, columns, nrows)

    report = LoadReport(tdef.name, nrows)
    if tdef.primary_key is not None:
        pkcol = columns[tdef.primary_key]
        index: Dict[object, int] = {}
        for i in range(nrows):
            v = pkcol.get(i)
            if v is None:
                raise DataError(f"table {tdef.name}: row {i + 1}: null primary key")
            if v in index:
                raise DataError(f"table {tdef.name}: duplicate primary key {v!r}")
            index[v] = i
        data.pk_index = index

    for fk in tdef.foreign_keys:
        parent = db.tables.get(fk.references)
        parent_index = parent.pk_index if parent is not None else {}
        fkcol = columns[fk.column]
        for i in range(nrows):
            v = fkcol.get(i)
            if v is None or v in parent_index:
                continue
            report.dangling_fk += 1
            if strict:
                raise DataError(
                    f"table {tdef.name}: row {i + 1}: foreign key {fk.column}={v!r} "
                    f"has no match in {fk.references}"
                )
            if len(report.samples) < 5:
                report.samples.append(f"{fk.column}={v!r}")

    db.tables[tdef.name] = data
    db.reports.append(report)
    db._graph = None
    db._time_range = None
    return db


def save_table_csv(db: Database, table: str, path: Path) -> None:
    data = db.table(table)
    tdef = data.definition
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(tdef.column_names)
        cols = [data.column(n) for n in tdef.column_names]
        for i in range(data.nrows):
            writer.writerow(_format_cell(c.get(i), c.dtype) for c in cols)


def save_database(db: Database, directory: Path) -> None:
    """Write schema.json plus one <table>.csv per table into `directory`."""
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "schema.json").write_text(json.dumps(schema_to_json(db.schema), indent=2) + "\n")
    for name in db.schema.tables:
        save_table_csv(db, name, directory / f"{name.lower()}.csv")


def load_database(schema_path: Path, data_dir: Path, *, strict: bool = True) -> Database:
    schema = load_schema(Path(schema_path))
    db = new_database(schema)
    # Parents before children so strict FK checks can resolve.
    for name in _load_order(schema):
        path = Path(data_dir) / f"{name.lower()}.csv"
        if path.exists():
            load_table_data(db, name, path, strict=strict)
    return db


def _load_order(schema: Schema) -> List[str]:
    """Topological order over FK dependencies (parents first); cycles fall
    back to name order for the remainder."""
    remaining = dict(schema.tables)
    ordered: List[str] = []
    placed: set = set()
    while remaining:
        progressed = False
        for name in sorted(remaining):
            deps = {fk.references for fk in remaining[name].foreign_keys} - {name}
            if deps <= placed:
                ordered.append(name)
                placed.add(name)
                del remaining[name]
                progressed = True
        if not progressed:
            ordered.extend(sorted(remaining))
            break
    return ordered


# ---------------------------------------------------------------------------
# Row graph


@dataclass
class EdgeIndex:
    """CSR adjacency for one FK edge.

    `order` lists child row indices grouped by parent; within a parent the
    dated children come first sorted by time (ties keep load order), then
    undated children in load order. `times` aligns with `order`.
    """

    edge: FkEdge
    forward: np.ndarray  # child row -> parent row, -1 when null/dangling
    indptr: np.ndarray  # parent row -> slice start in `order`
    dated_end: np.ndarray  # parent row -> end of the dated prefix
    order: np.ndarray
    times: np.ndarray


class RowGraph:
    """Immutable heterogeneous row graph over a loaded database."""

    def __init__(self, db: Database):
        self.db = db
        self.edges: Dict[FkEdge, EdgeIndex] = {}
        for edge in db.schema.edges():
            self.edges[edge] = self._build_edge(db, edge)

    @staticmethod
    def _build_edge(db: Database, edge: FkEdge) -> EdgeIndex:
        child = db.tables.get(edge.child_table)
        parent = db.tables.get(edge.parent_table)
        n_child = child.nrows if child else 0
        n_parent = parent.nrows if parent else 0

        forward = np.full(n_child, -1, dtype=np.int64)
        if child and parent and n_child and n_parent:
            fkcol = child.column(edge.fk_column)
            pkcol = parent.column(parent.definition.primary_key)
            if fkcol.dtype is DataType.INT64:
                # Vectorized lookup through the sorted parent keys.
                sorter = np.argsort(pkcol.values, kind="stable")
                sorted_pk = pkcol.values[sorter]
                pos = np.searchsorted(sorted_pk, fkcol.values)
                pos_c = np.minimum(pos, len(sorted_pk) - 1)
                hit = (sorted_pk[pos_c] == fkcol.values) & ~fkcol.null
                forward[hit] = sorter[pos_c[hit]]
            else:
                pk_index = parent.pk_index
                for i in range(n_child):
                    v = fkcol.get(i)
                    if v is not None:
                        forward[i] = pk_index.get(v, -1)

        linked = np.nonzero(forward >= 0)[0]
        tdef = child.definition if child else None
        if tdef is not None and tdef.time_column is not None and len(linked):
            tcol = child.column(tdef.time_column)
            undated = tcol.null[linked]
            times = tcol.values[linked]
        else:
            undated = np.zeros(len(linked), dtype=np.bool_)
            times = np.zeros(len(linked), dtype=np.int64)
            if tdef is None or tdef.time_column is None:
                undated[:] = True

        # Stable sort: parent, dated-before-undated, then time. Ties keep
        # load order, which is what the window tie rule requires.
        perm = np.lexsort((times, undated, forward[linked]))
        order = linked[perm]
        sorted_parents = forward[order]
        counts = np.bincount(sorted_parents, minlength=n_parent)
        indptr = np.zeros(n_parent + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        dated_counts = np.bincount(sorted_parents[~undated[perm]], minlength=n_parent)
        dated_end = indptr[:-1] + dated_counts
        return EdgeIndex(
            edge,
            forward,
            indptr,
            dated_end,
            order,
            times[perm].astype(np.int64, copy=False),
        )

    def edge_index(self, edge: FkEdge) -> EdgeIndex:
        if edge not in self.edges:
            raise DataError(f"no such foreign-key edge: {edge}")
        return self.edges[edge]

    def parent_of(self, edge: FkEdge, child_row: int) -> Optional[int]:
        p = self.edge_index(edge).forward[child_row]
        return None if p < 0 else int(p)

    def children_in_window(
        self,
        parent: RowRef,
        edge: FkEdge,
        lo: Optional[int],
        hi: Optional[int],
    ) -> List[RowRef]:
        """Dated children of `parent` with lo <= time < hi, in time order.

        `lo` None means unbounded past, `hi` None unbounded future.
        """
        idx = self.edge_index(edge)
        if parent.table.upper() != edge.parent_table:
            raise DataError(
                f"row of table {parent.table} cannot be a parent for edge {edge}"
            )
        lo_pos, hi_pos = self._window_slice(idx, parent.index, lo, hi)
        return [RowRef(edge.child_table, int(r)) for r in idx.order[lo_pos:hi_pos]]

    def _window_slice(self, idx: EdgeIndex, parent_row: int, lo, hi) -> Tuple[int, int]:
        start = idx.indptr[parent_row]
        end = idx.dated_end[parent_row]
        seg = idx.times[start:end]
        lo_pos = start + (0 if lo is None else np.searchsorted(seg, lo, side="left"))
        hi_pos = start + (len(seg) if hi is None else np.searchsorted(seg, hi, side="left"))
        return int(lo_pos), int(hi_pos)

    def all_children(self, parent: RowRef, edge: FkEdge) -> List[RowRef]:
        """Every child of `parent`, dated first in time order, undated after."""
        idx = self.edge_index(edge)
        if parent.table.upper() != edge.parent_table:
            raise DataError(
                f"row of table {parent.table} cannot be a parent for edge {edge}"
            )
        start, end = idx.indptr[parent.index], idx.indptr[parent.index + 1]
        return [RowRef(edge.child_table, int(r)) for r in idx.order[start:end]]


def build_row_graph(db: Database) -> RowGraph:
    """Build (or return the cached) row graph for a loaded database."""
    if db._graph is None:
        db._graph = RowGraph(db)
    return db._graph


def children_in_window(
    g: RowGraph,
    parent: RowRef,
    edge: FkEdge,
    lo: Optional[int],
    hi: Optional[int],
) -> List[RowRef]:
    return g.children_in_window(parent, edge, lo, hi)
