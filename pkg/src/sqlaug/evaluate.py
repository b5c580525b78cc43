"""In-memory evaluation of the supported SQL subset.

Executes an AST against DatabaseContent with bag semantics, mirroring the
common embedded-engine behaviors that matter for executability filtering:
integer division truncates toward zero, LIKE is case-insensitive, a scalar
subquery yields its first row (null when empty), and set operations
deduplicate.  Three-valued logic is reduced to two values: any comparison
against null is false, and aggregates skip nulls (count of nothing is 0,
other aggregates of nothing are null).

Clause order follows EXECUTION_ORDER: WHERE, GROUP BY, HAVING, SELECT,
ORDER BY, LIMIT.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Union

from .ast import (
    EXECUTION_ORDER,
    BoolOp,
    Calc,
    ColumnRef,
    Cond,
    Condition,
    Literal,
    OrderSpec,
    SelectItem,
    SelectQuery,
    SqlAst,
    ValueRange,
)
from .schema import DatabaseContent, Value


class EvalError(Exception):
    """Base class for runtime evaluation failures."""


class DivideByZero(EvalError, ZeroDivisionError):
    pass


class EvalTypeError(EvalError, TypeError):
    """Operator applied to values of an unsupported type combination."""


@dataclass(frozen=True)
class ResultTable:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def as_multiset(self) -> dict:
        out: dict = {}
        for row in self.rows:
            out[row] = out.get(row, 0) + 1
        return out


# Rows carry values keyed by (table_lower, column_lower).
Env = dict[tuple[str, str], Value]


assert EXECUTION_ORDER == ("where", "group", "having", "select", "order", "limit")


def execute(ast: SqlAst, content: DatabaseContent) -> ResultTable:
    """Run a query and return its result table.

    Raises:
        DivideByZero: a division whose right side evaluates to zero.
        EvalTypeError: operator/type mismatch (such as LIKE on a number).
        EvalError: reference to a table or column the content lacks.
    """
    left = _execute_unit(ast.left, content)
    if not ast.set_op:
        return left
    right = _execute_unit(ast.right, content)
    if len(left.columns) != len(right.columns):
        raise EvalTypeError(
            f"set operation arity mismatch: {len(left.columns)} vs "
            f"{len(right.columns)} columns")
    lrows = _dedup(left.rows)
    rset = set(right.rows)
    if ast.set_op == "union":
        rows = lrows + tuple(r for r in _dedup(right.rows) if r not in set(lrows))
    elif ast.set_op == "intersect":
        rows = tuple(r for r in lrows if r in rset)
    elif ast.set_op == "except":
        rows = tuple(r for r in lrows if r not in rset)
    else:
        raise EvalError(f"unknown set operation {ast.set_op!r}")
    return ResultTable(columns=left.columns, rows=rows)


def _dedup(rows) -> tuple:
    seen = set()
    out = []
    for r in rows:
        if r not in seen:
            seen.add(r)
            out.append(r)
    return tuple(out)


def _execute_unit(q: SelectQuery, content: DatabaseContent) -> ResultTable:
    if (q.order_by is not None and q.order_by.agg and not q.group_by
            and not any(item.agg for item in q.select)):
        raise EvalTypeError(f"misuse of aggregate: {q.order_by.agg}()")
    rows = _from_rows(q, content)

    if q.where is not None:
        rows = [r for r in rows if _cond(q.where, r, q, content) is True]

    grouped = bool(q.group_by) or _wants_aggregate(q)
    if grouped:
        groups = _group(rows, q, content)
        if q.having is not None:
            groups = [g for g in groups
                      if _cond(q.having, None, q, content, group=g) is True]
        out_rows = [_project_group(q.select, g, q, content) for g in groups]
        if q.order_by is not None:
            out_rows = _order_groups(out_rows, groups, q, content)
    else:
        out_rows = [_project_row(q.select, r, q, content) for r in rows]
        if q.order_by is not None:
            keyed = [( _order_key_row(q.order_by, rows[i], q, content), i)
                     for i in range(len(rows))]
            keyed.sort(key=lambda p: (p[0], ))
            out_rows = [out_rows[i] for _, i in keyed]

    if any(item.distinct and item.agg is None for item in q.select):
        out_rows = list(_dedup(out_rows))

    if q.limit is not None:
        out_rows = out_rows[:q.limit]

    return ResultTable(columns=_labels(q.select), rows=tuple(out_rows))


def _wants_aggregate(q: SelectQuery) -> bool:
    if any(item.agg for item in q.select):
        return True
    if q.order_by is not None and q.order_by.agg:
        return True
    return False


def _labels(select: tuple[SelectItem, ...]) -> tuple[str, ...]:
    labels = []
    for item in select:
        if isinstance(item.expr, Calc):
            base = f"{item.expr.left.column} {item.expr.op} {item.expr.right.column}"
        else:
            base = item.expr.column
        if item.agg:
            inner = f"DISTINCT {base}" if item.distinct else base
            base = f"{item.agg}({inner})"
        label, n = base, 1
        while label in labels:
            n += 1
            label = f"{base}_{n}"
        labels.append(label)
    return tuple(labels)


# ---------------------------------------------------------------------------
# FROM
# ---------------------------------------------------------------------------


def _table_env(content: DatabaseContent, table_name: str) -> list[Env]:
    table = content.schema.find_table(table_name)
    if table is None:
        raise EvalError(f"{content.db_id}: no table {table_name!r}")
    tkey = table.name.lower()
    cols = [c.name.lower() for c in table.columns]
    return [{(tkey, c): v for c, v in zip(cols, row)}
            for row in content.table_rows(table.name)]


def _from_rows(q: SelectQuery, content: DatabaseContent) -> list[Env]:
    if len(q.from_tables) == 1:
        return _table_env(content, q.from_tables[0])

    placed = {q.from_tables[0].lower()}
    rows = _table_env(content, q.from_tables[0])
    edges = list(q.joins)
    while edges:
        edge = next((e for e in edges
                     if e.left_table.lower() in placed
                     or e.right_table.lower() in placed), None)
        if edge is None:
            break
        edges.remove(edge)
        lt, rt = edge.left_table.lower(), edge.right_table.lower()
        new_table = rt if lt in placed else lt
        if new_table in placed:  # both ends placed: filter existing rows
            rows = [r for r in rows if _join_match(r, edge)]
            continue
        placed.add(new_table)
        extension = _table_env(content, new_table)
        joined = []
        for left_row in rows:
            for right_row in extension:
                merged = {**left_row, **right_row}
                if _join_match(merged, edge):
                    joined.append(merged)
        rows = joined
    # tables with no edge: cross product (kept deterministic, rare)
    for t in q.from_tables:
        if t.lower() not in placed:
            placed.add(t.lower())
            extension = _table_env(content, t)
            rows = [{**a, **b} for a in rows for b in extension]
    return rows


def _join_match(row: Env, edge) -> bool:
    a = row.get((edge.left_table.lower(), edge.left_column.lower()))
    b = row.get((edge.right_table.lower(), edge.right_column.lower()))
    return a is not None and b is not None and a == b


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


def _col_value(ref: ColumnRef, row: Env, q: SelectQuery,
               content: DatabaseContent) -> Value:
    if ref.is_star:
        raise EvalError("bare * outside count(*)")
    col = ref.column.lower()
    if ref.table:
        key = (ref.table.lower(), col)
        if key not in row:
            raise EvalError(f"unknown column {ref.table}.{ref.column}")
        return row[key]
    hits = [k for k in row if k[1] == col]
    if not hits:
        raise EvalError(f"unknown column {ref.column}")
    if len(hits) > 1:
        raise EvalError(f"ambiguous column {ref.column}")
    return row[hits[0]]


def _arith(op: str, a: Value, b: Value) -> Value:
    if a is None or b is None:
        return None
    if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
        raise EvalTypeError(f"arithmetic {op!r} on non-numeric value")
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise DivideByZero("division by zero")
        if isinstance(a, int) and isinstance(b, int):
            return math.trunc(a / b)
        return a / b
    raise EvalError(f"unknown arithmetic operator {op!r}")


def _expr_value(expr, row: Env, q: SelectQuery, content: DatabaseContent) -> Value:
    if isinstance(expr, ColumnRef):
        return _col_value(expr, row, q, content)
    if isinstance(expr, Calc):
        a = _col_value(expr.left, row, q, content)
        b = _col_value(expr.right, row, q, content)
        return _arith(expr.op, a, b)
    raise EvalError(f"unknown expression {expr!r}")


def _aggregate(agg: str, expr, rows: list[Env], q: SelectQuery,
               content: DatabaseContent, distinct: bool = False) -> Value:
    if agg == "count" and isinstance(expr, ColumnRef) and expr.is_star:
        return len(rows)
    values = [_expr_value(expr, r, q, content) for r in rows]
    values = [v for v in values if v is not None]
    if distinct:
        values = list(dict.fromkeys(values))
    if agg == "count":
        return len(values)
    if not values:
        return None
    if agg == "sum":
        _require_numbers(agg, values)
        return sum(values)
    if agg == "avg":
        _require_numbers(agg, values)
        return sum(values) / len(values)
    if agg == "max":
        return _extreme(max, values)
    if agg == "min":
        return _extreme(min, values)
    raise EvalError(f"unknown aggregate {agg!r}")


def _require_numbers(agg: str, values) -> None:
    for v in values:
        if not isinstance(v, (int, float)):
            raise EvalTypeError(f"{agg}() over non-numeric value {v!r}")


def _extreme(fn, values):
    try:
        return fn(values)
    except TypeError as exc:
        raise EvalTypeError(f"mixed types under min/max: {exc}") from exc


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------


def _cond(cond: Cond, row: Optional[Env], q: SelectQuery,
          content: DatabaseContent, group: Optional[list[Env]] = None) -> bool:
    if isinstance(cond, BoolOp):
        left = _cond(cond.left, row, q, content, group)
        right = _cond(cond.right, row, q, content, group)
        return (left and right) if cond.op == "and" else (left or right)
    return _compare_condition(cond, row, q, content, group)


def _compare_condition(c: Condition, row: Optional[Env], q: SelectQuery,
                       content: DatabaseContent,
                       group: Optional[list[Env]]) -> bool:
    if c.left_agg:
        if group is None:
            raise EvalError("aggregate condition outside HAVING")
        left = _aggregate(c.left_agg, c.left, group, q, content)
    else:
        anchor = row if row is not None else (group[0] if group else None)
        if anchor is None:
            return False
        left = _expr_value(c.left, anchor, q, content)

    if c.op in ("in", "not in"):
        member = _in_membership(left, c.right, content)
        return member if c.op == "in" else (left is not None and not member)

    if c.op == "between":
        if not isinstance(c.right, ValueRange):
            raise EvalError("BETWEEN needs a value range")
        low, high = c.right.low.value, c.right.high.value
        return (_binary("<=", low, left) is True
                and _binary("<=", left, high) is True)

    right = _right_value(c.right, row, q, content, group)
    return _binary(c.op, left, right) is True


def _right_value(right, row, q, content, group) -> Value:
    if isinstance(right, Literal):
        return right.value
    if isinstance(right, (ColumnRef, Calc)):
        anchor = row if row is not None else (group[0] if group else None)
        if anchor is None:
            return None
        return _expr_value(right, anchor, q, content)
    if isinstance(right, SqlAst):
        sub = execute(right, content)
        if not sub.rows:
            return None
        return sub.rows[0][0]
    raise EvalError(f"unknown right side {right!r}")


def _in_membership(left: Value, right, content: DatabaseContent) -> bool:
    if left is None:
        return False
    if isinstance(right, SqlAst):
        sub = execute(right, content)
        pool = {r[0] for r in sub.rows if r[0] is not None}
    elif isinstance(right, Literal):
        pool = {right.value}
    else:
        raise EvalError("IN expects a nested query or literal")
    return any(_binary("=", left, v) is True for v in pool)


_LIKE_CACHE: dict[str, re.Pattern] = {}


def _like(text: Value, pattern: Value) -> bool:
    if text is None or pattern is None:
        return False
    if not isinstance(text, str) or not isinstance(pattern, str):
        raise EvalTypeError("LIKE needs text operands")
    rx = _LIKE_CACHE.get(pattern)
    if rx is None:
        parts = []
        for ch in pattern:
            if ch == "%":
                parts.append(".*")
            elif ch == "_":
                parts.append(".")
            else:
                parts.append(re.escape(ch))
        rx = re.compile("^" + "".join(parts) + "$", re.IGNORECASE | re.DOTALL)
        _LIKE_CACHE[pattern] = rx
    return rx.match(text) is not None


def _binary(op: str, a: Value, b: Value) -> Optional[bool]:
    """Two-valued comparison: null on either side compares false."""
    if op == "like":
        return _like(a, b)
    if a is None or b is None:
        return False
    if op == "=":
        return _eq(a, b)
    if op == "!=":
        return not _eq(a, b)
    both_num = isinstance(a, (int, float)) and isinstance(b, (int, float))
    both_text = isinstance(a, str) and isinstance(b, str)
    if not (both_num or both_text):
        raise EvalTypeError(f"cannot order {type(a).__name__} against "
                            f"{type(b).__name__}")
    if op == ">":
        return a > b
    if op == "<":
        return a < b
    if op == ">=":
        return a >= b
    if op == "<=":
        return a <= b
    raise EvalError(f"unknown comparison {op!r}")


def _eq(a: Value, b: Value) -> bool:
    both_num = isinstance(a, (int, float)) and isinstance(b, (int, float))
    if both_num:
        return float(a) == float(b)
    if type(a) is not type(b):
        return False
    return a == b


# ---------------------------------------------------------------------------
# Grouping, projection, ordering
# ---------------------------------------------------------------------------


def _group(rows: list[Env], q: SelectQuery,
           content: DatabaseContent) -> list[list[Env]]:
    if not q.group_by:
        # implicit single group over the whole relation, even when empty
        return [rows]
    keys: dict[tuple, list[Env]] = {}
    for r in rows:
        key = tuple(_col_value(c, r, q, content) for c in q.group_by)
        keys.setdefault(key, []).append(r)
    return list(keys.values())


def _project_row(select, row: Env, q, content) -> tuple:
    return tuple(_expr_value(item.expr, row, q, content) for item in select)


def _project_group(select, group: list[Env], q, content) -> tuple:
    out = []
    for item in select:
        if item.agg:
            out.append(_aggregate(item.agg, item.expr, group, q, content,
                                  distinct=item.distinct))
        else:
            # plain column in a grouped query: constant within the group
            out.append(_expr_value(item.expr, group[0], q, content)
                       if group else None)
    return tuple(out)


class _SortKey:
    """Total order with nulls first; mixed types fall back to text order."""

    __slots__ = ("value",)

    def __init__(self, value: Value):
        self.value = value

    def _rank(self) -> tuple:
        v = self.value
        if v is None:
            return (0, 0)
        if isinstance(v, (int, float)):
            return (1, v)
        return (2, str(v))

    def __lt__(self, other: "_SortKey") -> bool:
        return self._rank() < other._rank()

    def __eq__(self, other) -> bool:
        return isinstance(other, _SortKey) and self._rank() == other._rank()


def _order_key_row(spec: OrderSpec, row: Env, q, content) -> _SortKey:
    value = _expr_value(spec.expr, row, q, content)
    key = _SortKey(value)
    if spec.direction == "desc":
        return _Reversed(key)
    return key


class _Reversed:
    __slots__ = ("key",)

    def __init__(self, key: _SortKey):
        self.key = key

    def __lt__(self, other: "_Reversed") -> bool:
        return other.key < self.key

    def __eq__(self, other) -> bool:
        return isinstance(other, _Reversed) and self.key == other.key


def _order_groups(out_rows: list[tuple], groups: list[list[Env]],
                  q: SelectQuery, content: DatabaseContent) -> list[tuple]:
    spec = q.order_by
    keys = []
    for g in groups:
        if spec.agg:
            value = _aggregate(spec.agg, spec.expr, g, q, content)
        else:
            value = _expr_value(spec.expr, g[0], q, content) if g else None
        key = _SortKey(value)
        keys.append(_Reversed(key) if spec.direction == "desc" else key)
    order = sorted(range(len(groups)), key=lambda i: (keys[i], ))
    return [out_rows[i] for i in order]
