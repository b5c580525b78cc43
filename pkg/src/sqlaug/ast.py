"""Typed SQL query trees, canonical rendering, and pattern extraction.

The supported subset covers unit queries (SELECT / FROM / WHERE / GROUP BY /
HAVING / ORDER BY / LIMIT) plus at most one set operation (INTERSECT, UNION,
EXCEPT) over two unit queries, and at most one level of query nesting inside
conditions.  Everything here is an immutable dataclass so query trees can be
hashed, compared structurally, and shared across worker threads.

A *pattern* is the flat token form of a query with every database-specific
item erased: identifiers become the slot tokens A / C / V, comparison
operators collapse to OP, aggregators to AGG, arithmetic to CALC, and sort
direction to DIR.  Two queries that differ only in tables, columns, or
values share a pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

# Closed token alphabet for patterns.
SELECT = "SELECT"
WHERE = "WHERE"
GROUP_BY = "GROUP_BY"
HAVING = "HAVING"
ORDER_BY = "ORDER_BY"
LIMIT = "LIMIT"
INTERSECT = "INTERSECT"
UNION = "UNION"
EXCEPT = "EXCEPT"
AND = "AND"
OR = "OR"
SLOT_A = "A"
SLOT_C = "C"
SLOT_OP = "OP"
SLOT_V = "V"
SLOT_DIR = "DIR"
SLOT_AGG = "AGG"
SLOT_CALC = "CALC"
NESTED_OPEN = "NESTED_OPEN"
NESTED_CLOSE = "NESTED_CLOSE"

PATTERN_ALPHABET = frozenset(
    {
        SELECT, WHERE, GROUP_BY, HAVING, ORDER_BY, LIMIT,
        INTERSECT, UNION, EXCEPT, AND, OR,
        SLOT_A, SLOT_C, SLOT_OP, SLOT_V, SLOT_DIR, SLOT_AGG, SLOT_CALC,
        NESTED_OPEN, NESTED_CLOSE,
    }
)

# A pattern is just a tuple of alphabet tokens.
Pattern = tuple[str, ...]

SET_OPS = ("intersect", "union", "except")
AGGREGATORS = ("count", "max", "min", "sum", "avg")
COMPARISON_OPS = ("=", "!=", ">", ">=", "<", "<=", "like", "in", "not in", "between")
ARITHMETIC_OPS = ("+", "-", "*", "/")
DIRECTIONS = ("asc", "desc")

# Clause evaluation order shared by the execution engine and by question
# composition: filters run first, then grouping and group filters, then
# projection, then sorting and truncation.
EXECUTION_ORDER = ("where", "group", "having", "select", "order", "limit")


def pattern_to_text(pattern: Iterable[str]) -> str:
    return " ".join(pattern)


def pattern_from_text(text: str) -> Pattern:
    tokens = tuple(text.split())
    for tok in tokens:
        if tok not in PATTERN_ALPHABET:
            raise ValueError(f"not a pattern token: {tok!r}")
    return tokens


@dataclass(frozen=True)
class Literal:
    """A literal comparison value: int, float, or string."""

    value: Union[int, float, str]

    def render(self) -> str:
        if isinstance(self.value, str):
            return "'" + self.value.replace("'", "''") + "'"
        return str(self.value)


@dataclass(frozen=True)
class ValueRange:
    """The two bounds of a BETWEEN condition."""

    low: Literal
    high: Literal


@dataclass(frozen=True)
class ColumnRef:
    """A column reference, optionally qualified with its table."""

    column: str
    table: Optional[str] = None

    @property
    def is_star(self) -> bool:
        return self.column == "*"

    def render(self) -> str:
        if self.table:
            return f"{self.table}.{self.column}"
        return self.column


@dataclass(frozen=True)
class Calc:
    """Binary arithmetic over two column references."""

    left: ColumnRef
    op: str
    right: ColumnRef


ColumnExpr = Union[ColumnRef, Calc]


@dataclass(frozen=True)
class SelectItem:
    expr: ColumnExpr
    agg: Optional[str] = None
    distinct: bool = False


@dataclass(frozen=True)
class Condition:
    """One comparison.  The right side is exactly one of: a literal value
    (or value pair for BETWEEN), a column expression, or a nested query."""

    left: ColumnExpr
    op: str
    right: Union[Literal, ValueRange, ColumnRef, Calc, "SqlAst"]
    left_agg: Optional[str] = None


@dataclass(frozen=True)
class BoolOp:
    """AND / OR over two condition subtrees."""

    op: str
    left: "Cond"
    right: "Cond"


Cond = Union[Condition, BoolOp]


@dataclass(frozen=True)
class OrderSpec:
    expr: ColumnExpr
    direction: str = "asc"
    agg: Optional[str] = None


@dataclass(frozen=True)
class JoinEdge:
    """A foreign-key equijoin edge between two tables."""

    left_table: str
    left_column: str
    right_table: str
    right_column: str


@dataclass(frozen=True)
class SelectQuery:
    """One unit query."""

    select: tuple[SelectItem, ...]
    from_tables: tuple[str, ...]
    joins: tuple[JoinEdge, ...] = ()
    where: Optional[Cond] = None
    group_by: tuple[ColumnRef, ...] = ()
    having: Optional[Cond] = None
    order_by: Optional[OrderSpec] = None
    limit: Optional[int] = None


@dataclass(frozen=True)
class SqlAst:
    """A full query: one unit query, or a set operation over two."""

    left: SelectQuery
    set_op: Optional[str] = None
    right: Optional[SelectQuery] = None

    def units(self) -> tuple[SelectQuery, ...]:
        if self.set_op:
            return (self.left, self.right)
        return (self.left,)


def unit_query(q: SelectQuery) -> SqlAst:
    return SqlAst(left=q)


def is_canonical(ast: SqlAst) -> bool:
    """Generated queries never carry LIMIT without ORDER BY; parsed input
    may.  Such queries are accepted but reported non-canonical."""
    for q in ast.units():
        if q.limit is not None and q.order_by is None:
            return False
    return True


# ---------------------------------------------------------------------------
# Canonical rendering
# ---------------------------------------------------------------------------

# Token types as used by clause decomposition and alignment export.
T_KEYWORD = "keyword"
T_COLUMN = "column"
T_TABLE = "table"
T_VALUE = "value"
T_OTHER = "other"

# Sections of a unit query, in source order.
S_SELECT = "select"
S_FROM = "from"
S_WHERE = "where"
S_GROUP = "group"
S_HAVING = "having"
S_ORDER = "order"
S_LIMIT = "limit"
S_SETOP = "setop"


@dataclass(frozen=True)
class SqlToken:
    """One token of the canonical rendering.

    ``glue`` marks tokens that attach to the previous one without a space
    (commas, aggregate parentheses).  ``unit`` is 0 or 1 for the two sides
    of a set operation; ``depth`` is 1 inside a nested subquery.
    """

    text: str
    ttype: str
    section: str
    unit: int = 0
    depth: int = 0
    glue: bool = False


class _Emitter:
    def __init__(self) -> None:
        self.out: list[SqlToken] = []

    def tok(self, text: str, ttype: str, section: str, unit: int, depth: int,
            glue: bool = False) -> None:
        self.out.append(SqlToken(text, ttype, section, unit, depth, glue))

    # -- expressions --------------------------------------------------

    def column(self, ref: ColumnRef, q: SelectQuery, section: str, unit: int,
               depth: int, glue: bool = False) -> None:
        # Qualify only when the unit reads from several tables.
        if ref.table and len(q.from_tables) > 1:
            text = f"{ref.table}.{ref.column}"
        else:
            text = ref.column
        self.tok(text, T_COLUMN, section, unit, depth, glue)

    def expr(self, e: ColumnExpr, q: SelectQuery, section: str, unit: int,
             depth: int, glue: bool = False) -> None:
        if isinstance(e, Calc):
            self.column(e.left, q, section, unit, depth, glue)
            self.tok(e.op, T_OTHER, section, unit, depth)
            self.column(e.right, q, section, unit, depth)
        else:
            self.column(e, q, section, unit, depth, glue)

    def agg_expr(self, agg: str, e: ColumnExpr, q: SelectQuery, section: str,
                 unit: int, depth: int, distinct: bool = False) -> None:
        self.tok(agg, T_KEYWORD, section, unit, depth)
        self.tok("(", T_OTHER, section, unit, depth, glue=True)
        if distinct:
            self.tok("DISTINCT", T_KEYWORD, section, unit, depth, glue=True)
            self.expr(e, q, section, unit, depth)
        else:
            self.expr(e, q, section, unit, depth, glue=True)
        self.tok(")", T_OTHER, section, unit, depth, glue=True)

    def literal(self, lit: Literal, section: str, unit: int, depth: int) -> None:
        self.tok(lit.render(), T_VALUE, section, unit, depth)

    # -- conditions ---------------------------------------------------

    def cond(self, c: Cond, q: SelectQuery, section: str, unit: int,
             depth: int, parent_prec: int = 0, right_side: bool = False) -> None:
        if isinstance(c, BoolOp):
            prec = 2 if c.op == "and" else 1
            need_parens = prec < parent_prec or (prec == parent_prec and right_side)
            if need_parens:
                self.tok("(", T_OTHER, section, unit, depth)
            self.cond(c.left, q, section, unit, depth, prec, False)
            self.tok(c.op.upper(), T_KEYWORD, section, unit, depth)
            self.cond(c.right, q, section, unit, depth, prec, True)
            if need_parens:
                self.tok(")", T_OTHER, section, unit, depth)
            return

        if c.left_agg:
            self.agg_expr(c.left_agg, c.left, q, section, unit, depth)
        else:
            self.expr(c.left, q, section, unit, depth)

        op = c.op
        if op == "between":
            self.tok("BETWEEN", T_KEYWORD, section, unit, depth)
            assert isinstance(c.right, ValueRange)
            self.literal(c.right.low, section, unit, depth)
            self.tok("AND", T_KEYWORD, section, unit, depth)
            self.literal(c.right.high, section, unit, depth)
            return
        if op in ("in", "not in", "like"):
            self.tok(op.upper(), T_KEYWORD, section, unit, depth)
        else:
            self.tok(op, T_OTHER, section, unit, depth)

        rhs = c.right
        if isinstance(rhs, Literal):
            self.literal(rhs, section, unit, depth)
        elif isinstance(rhs, (ColumnRef, Calc)):
            self.expr(rhs, q, section, unit, depth)
        elif isinstance(rhs, SqlAst):
            self.tok("(", T_OTHER, section, unit, depth)
            self.ast(rhs, base_unit=unit, depth=1, section=section)
            self.tok(")", T_OTHER, section, unit, depth)
        else:  # pragma: no cover - construction bug
            raise TypeError(f"bad condition rhs: {rhs!r}")

    # -- units ----------------------------------------------------------

    def unit(self, q: SelectQuery, unit: int, depth: int = 0,
             outer_section: Optional[str] = None) -> None:
        sec = lambda s: outer_section or s  # noqa: E731 - tiny local alias

        self.tok("SELECT", T_KEYWORD, sec(S_SELECT), unit, depth)
        for i, item in enumerate(q.select):
            if i:
                self.tok(",", T_OTHER, sec(S_SELECT), unit, depth, glue=True)
            if item.agg:
                self.agg_expr(item.agg, item.expr, q, sec(S_SELECT), unit,
                              depth, distinct=item.distinct)
            else:
                if item.distinct:
                    self.tok("DISTINCT", T_KEYWORD, sec(S_SELECT), unit, depth)
                self.expr(item.expr, q, sec(S_SELECT), unit, depth)

        self.tok("FROM", T_KEYWORD, sec(S_FROM), unit, depth)
        if q.joins:
            order = _linearize_tables(q.from_tables, q.joins)
            placed = {order[0]}
            self.tok(order[0], T_TABLE, sec(S_FROM), unit, depth)
            remaining = list(q.joins)
            while remaining:
                edge = next((e for e in remaining
                             if (e.left_table in placed) != (e.right_table in placed)),
                            None)
                if edge is None:
                    break  # cycle or disconnected edge set; render what we have
                remaining.remove(edge)
                if edge.left_table in placed:
                    lt, lc, rt, rc = (edge.left_table, edge.left_column,
                                      edge.right_table, edge.right_column)
                else:
                    lt, lc, rt, rc = (edge.right_table, edge.right_column,
                                      edge.left_table, edge.left_column)
                placed.add(rt)
                self.tok("JOIN", T_KEYWORD, sec(S_FROM), unit, depth)
                self.tok(rt, T_TABLE, sec(S_FROM), unit, depth)
                self.tok("ON", T_KEYWORD, sec(S_FROM), unit, depth)
                self.tok(f"{lt}.{lc}", T_COLUMN, sec(S_FROM), unit, depth)
                self.tok("=", T_OTHER, sec(S_FROM), unit, depth)
                self.tok(f"{rt}.{rc}", T_COLUMN, sec(S_FROM), unit, depth)
        else:
            for i, t in enumerate(q.from_tables):
                if i:
                    self.tok(",", T_OTHER, sec(S_FROM), unit, depth, glue=True)
                self.tok(t, T_TABLE, sec(S_FROM), unit, depth)

        if q.where is not None:
            self.tok("WHERE", T_KEYWORD, sec(S_WHERE), unit, depth)
            self.cond(q.where, q, sec(S_WHERE), unit, depth)
        if q.group_by:
            self.tok("GROUP BY", T_KEYWORD, sec(S_GROUP), unit, depth)
            for i, col in enumerate(q.group_by):
                if i:
                    self.tok(",", T_OTHER, sec(S_GROUP), unit, depth, glue=True)
                self.column(col, q, sec(S_GROUP), unit, depth)
        if q.having is not None:
            self.tok("HAVING", T_KEYWORD, sec(S_HAVING), unit, depth)
            self.cond(q.having, q, sec(S_HAVING), unit, depth)
        if q.order_by is not None:
            spec = q.order_by
            self.tok("ORDER BY", T_KEYWORD, sec(S_ORDER), unit, depth)
            if spec.agg:
                self.agg_expr(spec.agg, spec.expr, q, sec(S_ORDER), unit, depth)
            else:
                self.expr(spec.expr, q, sec(S_ORDER), unit, depth)
            self.tok(spec.direction.upper(), T_KEYWORD, sec(S_ORDER), unit, depth)
        if q.limit is not None:
            self.tok("LIMIT", T_KEYWORD, sec(S_LIMIT), unit, depth)
            self.tok(str(q.limit), T_VALUE, sec(S_LIMIT), unit, depth)

    def ast(self, ast: SqlAst, base_unit: int = 0, depth: int = 0,
            section: Optional[str] = None) -> None:
        self.unit(ast.left, base_unit, depth, outer_section=section)
        if ast.set_op:
            self.tok(ast.set_op.upper(), T_KEYWORD, section or S_SETOP,
                     base_unit, depth)
            self.unit(ast.right, base_unit + 1 if depth == 0 else base_unit,
                      depth, outer_section=section)


def _linearize_tables(tables: tuple[str, ...], joins: tuple[JoinEdge, ...]) -> list[str]:
    """Order tables so every JOIN ... ON references an already-placed table."""
    start = sorted(tables)[0]
    order = [start]
    seen = {start}
    edges = list(joins)
    while len(order) < len(tables):
        progressed = False
        for e in edges:
            for a, b in ((e.left_table, e.right_table), (e.right_table, e.left_table)):
                if a in seen and b not in seen:
                    order.append(b)
                    seen.add(b)
                    progressed = True
        if not progressed:
            # Disconnected join spec; append the rest in name order.
            for t in sorted(tables):
                if t not in seen:
                    order.append(t)
                    seen.add(t)
            break
    return order


def sql_tokens(ast: SqlAst) -> list[SqlToken]:
    """Canonical token stream of a query, tagged with type, section, unit,
    and nesting depth.  Compound keywords (GROUP BY, ORDER BY) are single
    tokens."""
    em = _Emitter()
    em.ast(ast)
    return em.out


def render_tokens(tokens: Iterable[SqlToken]) -> str:
    parts: list[str] = []
    for tok in tokens:
        if parts and not tok.glue:
            parts.append(" ")
        parts.append(tok.text)
    return "".join(parts)


def serialize_sql(ast: SqlAst) -> str:
    """Canonical single-line rendering of a query tree."""
    return render_tokens(sql_tokens(ast))


# ---------------------------------------------------------------------------
# Pattern extraction
# ---------------------------------------------------------------------------


def _expr_pattern(e: ColumnExpr, agg: Optional[str], select_context: bool) -> list[str]:
    slot = SLOT_A if select_context else SLOT_C
    toks: list[str] = []
    if agg:
        toks.append(SLOT_AGG)
    toks.append(SLOT_CALC if isinstance(e, Calc) else slot)
    return toks


def _cond_pattern(c: Cond) -> list[str]:
    if isinstance(c, BoolOp):
        return _cond_pattern(c.left) + [c.op.upper()] + _cond_pattern(c.right)
    toks = _expr_pattern(c.left, c.left_agg, select_context=False)
    toks.append(SLOT_OP)
    rhs = c.right
    if isinstance(rhs, (Literal, ValueRange)):
        toks.append(SLOT_V)
    elif isinstance(rhs, Calc):
        toks.append(SLOT_CALC)
    elif isinstance(rhs, ColumnRef):
        toks.append(SLOT_C)
    elif isinstance(rhs, SqlAst):
        toks.append(NESTED_OPEN)
        toks.extend(extract_pattern(rhs))
        toks.append(NESTED_CLOSE)
    return toks


def _unit_pattern(q: SelectQuery) -> list[str]:
    toks = [SELECT]
    for item in q.select:
        toks.extend(_expr_pattern(item.expr, item.agg, select_context=True))
    if q.where is not None:
        toks.append(WHERE)
        toks.extend(_cond_pattern(q.where))
    if q.group_by:
        toks.append(GROUP_BY)
        toks.extend(SLOT_C for _ in q.group_by)
    if q.having is not None:
        toks.append(HAVING)
        toks.extend(_cond_pattern(q.having))
    if q.order_by is not None:
        toks.append(ORDER_BY)
        if q.order_by.agg:
            toks.append(SLOT_AGG)
        toks.append(SLOT_CALC if isinstance(q.order_by.expr, Calc) else SLOT_C)
        toks.append(SLOT_DIR)
    if q.limit is not None:
        toks.extend((LIMIT, SLOT_V))
    return toks


def extract_pattern(ast: SqlAst) -> Pattern:
    """Erase identifiers and values, keeping the structural keyword shape.

    The FROM clause never contributes tokens: two queries that differ only
    in database-specific items share a pattern.
    """
    toks = _unit_pattern(ast.left)
    if ast.set_op:
        toks.append(ast.set_op.upper())
        toks.extend(_unit_pattern(ast.right))
    return tuple(toks)
