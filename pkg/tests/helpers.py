"""Test-only helpers: a SQLite reference harness for the query engine.

SQLite stores every numeric column as REAL so that division and
aggregation follow the same floating-point rules as the in-memory
engine; float cells are canonicalized to nine decimal places before
multiset comparison to absorb addition-order differences.
"""

import sqlite3
from collections import Counter

from sqlaug import EvalError, execute, serialize_sql
from sqlaug.generate import fill_sketch


def sqlite_connection(content) -> sqlite3.Connection:
    conn = sqlite3.connect(":memory:")
    for table in content.schema.tables:
        decls = ", ".join(
            f'"{c.name}" {"REAL" if c.ctype in ("number", "boolean") else "TEXT"}'
            for c in table.columns)
        conn.execute(f'CREATE TABLE "{table.name}" ({decls})')
        rows = content.rows[table.name.lower()]
        if rows:
            marks = ", ".join("?" for _ in table.columns)
            conn.executemany(
                f'INSERT INTO "{table.name}" VALUES ({marks})', rows)
    conn.commit()
    return conn


def _canon_cell(value):
    if isinstance(value, float):
        return round(value, 9)
    return value


def _canon_rows(rows) -> Counter:
    return Counter(tuple(_canon_cell(v) for v in row) for row in rows)


def compare_engines(ast, content, conn) -> str:
    """Run one query on both engines.

    Returns "match" when both error out or both yield equal result
    multisets, otherwise a short description of the disagreement.
    """
    ours_rows = ours_error = None
    try:
        ours_rows = execute(ast, content).rows
    except EvalError as exc:
        ours_error = exc
    ref_rows = ref_error = None
    try:
        ref_rows = conn.execute(serialize_sql(ast)).fetchall()
    except sqlite3.Error as exc:
        ref_error = exc

    if ours_error is not None and ref_error is not None:
        return "match"
    if ours_error is not None:
        return f"only ours errored: {ours_error}"
    if ref_error is not None:
        return f"only sqlite errored: {ref_error}"
    if _canon_rows(ours_rows) == _canon_rows(ref_rows):
        return "match"
    return f"result multisets differ: {ours_rows!r} vs {ref_rows!r}"


def query_pool(schemas, contents, patterns, config_factory, seeds):
    """Distinct (db_id, ast) pairs from filling each pattern against each
    database at each seed, in deterministic order."""
    pool = []
    seen = set()
    for seed in seeds:
        for schema in schemas:
            content = contents[schema.db_id]
            for pattern in patterns:
                for ast in fill_sketch(tuple(pattern.split()), schema,
                                       content, config_factory(seed)):
                    key = (schema.db_id, serialize_sql(ast))
                    if key in seen:
                        continue
                    seen.add(key)
                    pool.append((schema.db_id, ast))
    return pool
