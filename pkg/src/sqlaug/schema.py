"""Relational schemas and table contents.

Schemas load from the common tables.json layout used by cross-domain
text-to-SQL datasets: a list of database entries with ``table_names``,
``column_names`` (each ``[table_index, name]``), ``column_types``,
``foreign_keys`` (pairs of global column indices), and ``primary_keys``.
Both the ``*_original`` and plain name fields are understood; whichever is
missing is derived from the other.

Contents load either from one JSON document per database mapping table name
to a list of rows, or from a directory of one CSV file per table.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from .ast import JoinEdge

log = logging.getLogger(__name__)

COLUMN_TYPES = ("text", "number", "time", "boolean")

Value = Union[int, float, str, None]
Row = tuple[Value, ...]


class SchemaFormatError(ValueError):
    """Structurally invalid schema document."""


class DuplicateNameError(ValueError):
    """Two tables, or two columns of one table, share a name."""


class DanglingForeignKeyError(ValueError):
    """A foreign key references a column that does not exist, or links a
    table to itself."""


class Disconnected(ValueError):
    """No foreign-key path connects the requested tables."""


class ArityMismatchError(ValueError):
    """A content row has the wrong number of cells."""


class ContentTypeError(ValueError):
    """A content cell cannot be coerced to its column's declared type."""


@dataclass(frozen=True)
class Column:
    name: str
    natural_name: str
    ctype: str
    table: str  # owning table name


@dataclass(frozen=True)
class Table:
    name: str
    natural_name: str
    columns: tuple[Column, ...]

    def find_column(self, name: str) -> Optional[Column]:
        low = name.lower()
        for c in self.columns:
            if c.name.lower() == low:
                return c
        return None


@dataclass(frozen=True)
class ForeignKey:
    table: str
    column: str
    ref_table: str
    ref_column: str


@dataclass(frozen=True)
class Schema:
    db_id: str
    tables: tuple[Table, ...]
    foreign_keys: tuple[ForeignKey, ...] = ()
    primary_keys: frozenset[tuple[str, str]] = frozenset()  # (table, column), lowered

    def find_table(self, name: str) -> Optional[Table]:
        low = name.lower()
        for t in self.tables:
            if t.name.lower() == low:
                return t
        return None

    def all_columns(self) -> list[Column]:
        return [c for t in self.tables for c in t.columns]

    def is_primary(self, col: Column) -> bool:
        return (col.table.lower(), col.name.lower()) in self.primary_keys

    def natural(self, table: str, column: Optional[str] = None) -> str:
        t = self.find_table(table)
        if t is None:
            return _naturalize(column or table)
        if column is None:
            return t.natural_name
        c = t.find_column(column)
        return c.natural_name if c else _naturalize(column)


def _naturalize(name: str) -> str:
    return name.replace("_", " ").strip().lower()


def _schema_from_entry(entry: dict) -> Schema:
    try:
        db_id = entry["db_id"]
        table_names = entry.get("table_names_original") or entry["table_names"]
        natural_tables = entry.get("table_names") or table_names
        col_entries = entry.get("column_names_original") or entry["column_names"]
        natural_cols = entry.get("column_names") or col_entries
        col_types = entry["column_types"]
    except KeyError as exc:
        raise SchemaFormatError(f"missing field {exc} in schema entry") from exc
    if len(col_entries) != len(col_types) or len(col_entries) != len(natural_cols):
        raise SchemaFormatError(f"{db_id}: column name/type arity mismatch")

    seen_tables = set()
    for name in table_names:
        if name.lower() in seen_tables:
            raise DuplicateNameError(f"{db_id}: duplicate table {name!r}")
        seen_tables.add(name.lower())

    per_table: dict[int, list[Column]] = {i: [] for i in range(len(table_names))}
    flat: list[Optional[Column]] = []
    for (ti, name), (_, nat), ctype in zip(col_entries, natural_cols, col_types):
        if ti < 0:  # the shared "*" pseudo-column
            flat.append(None)
            continue
        if ti >= len(table_names):
            raise SchemaFormatError(f"{db_id}: column {name!r} references table #{ti}")
        ctype = ctype if ctype in COLUMN_TYPES else "text"
        col = Column(name=name, natural_name=_naturalize(nat),
                     ctype=ctype, table=table_names[ti])
        if any(c.name.lower() == name.lower() for c in per_table[ti]):
            raise DuplicateNameError(
                f"{db_id}: duplicate column {name!r} in table {table_names[ti]!r}")
        per_table[ti].append(col)
        flat.append(col)

    tables = tuple(
        Table(name=table_names[i], natural_name=_naturalize(natural_tables[i]),
              columns=tuple(per_table[i]))
        for i in range(len(table_names))
    )

    fks = []
    for pair in entry.get("foreign_keys", ()):
        a, b = pair
        if not (0 <= a < len(flat) and 0 <= b < len(flat)) or flat[a] is None or flat[b] is None:
            raise DanglingForeignKeyError(f"{db_id}: foreign key {pair} out of range")
        ca, cb = flat[a], flat[b]
        if ca.table.lower() == cb.table.lower():
            raise DanglingForeignKeyError(
                f"{db_id}: foreign key {pair} does not connect two tables")
        fks.append(ForeignKey(ca.table, ca.name, cb.table, cb.name))

    pks = frozenset(
        (flat[i].table.lower(), flat[i].name.lower())
        for i in entry.get("primary_keys", ())
        if 0 <= i < len(flat) and flat[i] is not None
    )
    return Schema(db_id=db_id, tables=tables, foreign_keys=tuple(fks),
                  primary_keys=pks)


def load_schemas(path: Union[str, Path]) -> list[Schema]:
    """Load every database schema in a tables.json document."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaFormatError(f"{path}: {exc}") from exc
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise SchemaFormatError(f"{path}: expected a list of schema entries")
    return [_schema_from_entry(e) for e in doc]


def load_schema(path: Union[str, Path], db_id: str) -> Schema:
    for schema in load_schemas(path):
        if schema.db_id == db_id:
            return schema
    raise SchemaFormatError(f"{path}: no schema for {db_id!r}")


# ---------------------------------------------------------------------------
# Contents
# ---------------------------------------------------------------------------


@dataclass
class DatabaseContent:
    """Typed, ordered rows for one database."""

    schema: Schema
    rows: dict[str, tuple[Row, ...]]  # keyed by lowered table name
    _distinct: dict[tuple[str, str], tuple] = field(default_factory=dict, repr=False)

    @property
    def db_id(self) -> str:
        return self.schema.db_id

    def table_rows(self, table: str) -> tuple[Row, ...]:
        return self.rows.get(table.lower(), ())

    def column_values(self, table: str, column: str) -> tuple:
        """Distinct non-null values of one column, deterministically sorted."""
        key = (table.lower(), column.lower())
        if key not in self._distinct:
            t = self.schema.find_table(table)
            if t is None:
                return ()
            idx = next((i for i, c in enumerate(t.columns)
                        if c.name.lower() == column.lower()), None)
            if idx is None:
                return ()
            vals = {row[idx] for row in self.table_rows(table) if row[idx] is not None}
            self._distinct[key] = tuple(sorted(vals, key=lambda v: (str(type(v)), v)))
        return self._distinct[key]


def _coerce(value, ctype: str, table: str, column: str, row_index: int):
    if value is None or value == "":
        return None
    if ctype == "number":
        if isinstance(value, bool):
            return int(value)
        if isinstance(value, (int, float)):
            return value
        try:
            text = str(value).strip()
            return float(text) if "." in text or "e" in text.lower() else int(text)
        except ValueError:
            raise ContentTypeError(
                f"{table}.{column} row {row_index}: {value!r} is not a number")
    if ctype == "boolean":
        if isinstance(value, bool):
            return int(value)
        if value in (0, 1):
            return int(value)
        text = str(value).strip().lower()
        if text in ("true", "t", "yes", "1"):
            return 1
        if text in ("false", "f", "no", "0"):
            return 0
        raise ContentTypeError(
            f"{table}.{column} row {row_index}: {value!r} is not a boolean")
    # text and time cells stay strings
    return str(value)


def _typed_rows(table: Table, raw_rows: Iterable[Iterable], source: str) -> tuple[Row, ...]:
    out = []
    ncols = len(table.columns)
    for i, raw in enumerate(raw_rows):
        cells = list(raw)
        if len(cells) != ncols:
            raise ArityMismatchError(
                f"{source}: table {table.name!r} row {i} has {len(cells)} cells, "
                f"expected {ncols}")
        out.append(tuple(
            _coerce(cell, col.ctype, table.name, col.name, i)
            for cell, col in zip(cells, table.columns)
        ))
    return tuple(out)


def load_content(path: Union[str, Path], schema: Schema) -> DatabaseContent:
    """Load rows for one database.

    ``path`` is either a JSON file mapping table name to a list of rows, or
    a directory holding one ``<table>.csv`` per table (header row required).
    Missing tables load as empty; unknown table names are an error.
    """
    path = Path(path)
    rows: dict[str, tuple[Row, ...]] = {t.name.lower(): () for t in schema.tables}

    if path.is_dir():
        for csv_path in sorted(path.glob("*.csv")):
            table = schema.find_table(csv_path.stem)
            if table is None:
                raise SchemaFormatError(
                    f"{csv_path}: no table {csv_path.stem!r} in {schema.db_id}")
            with open(csv_path, newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None:
                    continue
                if [h.lower() for h in header] != [c.name.lower() for c in table.columns]:
                    raise SchemaFormatError(
                        f"{csv_path}: header {header} does not match schema columns")
                rows[table.name.lower()] = _typed_rows(table, reader, str(csv_path))
        return DatabaseContent(schema=schema, rows=rows)

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaFormatError(f"{path}: expected an object of table -> rows")
    for name, raw_rows in doc.items():
        table = schema.find_table(name)
        if table is None:
            raise SchemaFormatError(f"{path}: no table {name!r} in {schema.db_id}")
        rows[table.name.lower()] = _typed_rows(table, raw_rows, str(path))
    return DatabaseContent(schema=schema, rows=rows)


def content_from_rows(schema: Schema, tables: dict[str, list]) -> DatabaseContent:
    """Build typed content directly from in-memory rows (test fixtures)."""
    rows: dict[str, tuple[Row, ...]] = {t.name.lower(): () for t in schema.tables}
    for name, raw_rows in tables.items():
        table = schema.find_table(name)
        if table is None:
            raise SchemaFormatError(f"no table {name!r} in {schema.db_id}")
        rows[table.name.lower()] = _typed_rows(table, raw_rows, "<memory>")
    return DatabaseContent(schema=schema, rows=rows)


# ---------------------------------------------------------------------------
# Foreign-key join paths
# ---------------------------------------------------------------------------


def _fk_edges(schema: Schema) -> list[JoinEdge]:
    edges = []
    for fk in schema.foreign_keys:
        edges.append(JoinEdge(fk.table, fk.column, fk.ref_table, fk.ref_column))
    # Canonical order makes tie-breaking deterministic.
    edges.sort(key=lambda e: (e.left_table.lower(), e.left_column.lower(),
                              e.right_table.lower(), e.right_column.lower()))
    return edges


def join_path(schema: Schema, tables: Iterable[str]) -> list[JoinEdge]:
    """Minimal set of foreign-key edges forming a tree that connects all the
    given tables, possibly through intermediate tables.

    Minimality is exact in edge count: a connected node set of size m needs
    m-1 tree edges, so the smallest connected superset of the requested
    tables wins.  Ties break on sorted table/column names.

    Raises:
        Disconnected: the tables do not share a foreign-key component.
    """
    wanted = sorted({t.lower() for t in tables})
    name_of = {t.name.lower(): t.name for t in schema.tables}
    for t in wanted:
        if t not in name_of:
            raise Disconnected(f"{schema.db_id}: unknown table {t!r}")
    if len(wanted) <= 1:
        return []

    edges = _fk_edges(schema)
    adjacent: dict[str, list[JoinEdge]] = {}
    for e in edges:
        adjacent.setdefault(e.left_table.lower(), []).append(e)
        adjacent.setdefault(e.right_table.lower(), []).append(e)

    others = sorted(t for t in name_of if t not in wanted)
    for extra_count in range(0, len(others) + 1):
        for extras in itertools.combinations(others, extra_count):
            nodes = set(wanted) | set(extras)
            tree = _spanning_tree(nodes, adjacent)
            if tree is not None:
                return tree
    raise Disconnected(f"{schema.db_id}: no foreign-key path over {wanted}")


def _spanning_tree(nodes: set[str], adjacent: dict[str, list[JoinEdge]]):
    """Deterministic spanning tree of the induced subgraph, or None."""
    start = sorted(nodes)[0]
    seen = {start}
    tree: list[JoinEdge] = []
    frontier = True
    while frontier and len(seen) < len(nodes):
        frontier = False
        for node in sorted(seen):
            for e in adjacent.get(node, ()):
                lt, rt = e.left_table.lower(), e.right_table.lower()
                if lt not in nodes or rt not in nodes:
                    continue
                other = rt if lt == node else lt
                if other in seen:
                    continue
                seen.add(other)
                tree.append(e)
                frontier = True
        # restart scan so the tie-break stays name-ordered
    if len(seen) != len(nodes):
        return None
    tree.sort(key=lambda e: (e.left_table.lower(), e.left_column.lower(),
                             e.right_table.lower(), e.right_column.lower()))
    return tree
