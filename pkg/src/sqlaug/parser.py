"""Recursive-descent parser for the supported SQL subset.

Keywords are matched case-insensitively; identifiers are preserved verbatim
and, when a schema is supplied, matched case-insensitively against it.
``ORDER_BY`` / ``GROUP_BY`` are accepted as aliases of the two-word forms.
Table aliases (``FROM head AS T1``) are resolved and removed: the returned
tree always references real table names.
"""

from __future__ import annotations

import difflib
import logging
import re
from typing import Optional

from .ast import (
    AGGREGATORS,
    BoolOp,
    Calc,
    ColumnRef,
    Cond,
    Condition,
    JoinEdge,
    Literal,
    OrderSpec,
    SelectItem,
    SelectQuery,
    SqlAst,
    ValueRange,
    is_canonical,
)

log = logging.getLogger(__name__)


class SqlSyntaxError(ValueError):
    """Raised on malformed input; carries the token position and what was
    expected there."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        detail = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class UnknownIdentifierError(ValueError):
    """An identifier that does not resolve against the supplied schema."""

    def __init__(self, name: str, candidates: list[str]):
        self.name = name
        self.candidates = candidates
        hint = f"; candidates: {', '.join(candidates)}" if candidates else ""
        super().__init__(f"unknown identifier {name!r}{hint}")


_KEYWORDS = {
    "select", "from", "where", "group", "by", "having", "order", "limit",
    "and", "or", "not", "in", "like", "between", "as", "join", "on",
    "distinct", "intersect", "union", "except", "asc", "desc",
}

_TOKEN_RE = re.compile(
    r"""
    \s*(
        '(?:[^']|'')*'            # single-quoted string
      | "(?:[^"]|"")*"            # double-quoted string
      | (?:\d+\.\d+|\.\d+|\d+)(?:[eE][+-]?\d+)?    # number
      | [A-Za-z_][\w]*(?:\.(?:[A-Za-z_][\w]*|\*))?   # identifier, maybe dotted
      | >= | <= | != | <>
      | [=<>(),;*+\-/]
    )
    """,
    re.VERBOSE,
)


class _Tok:
    __slots__ = ("text", "kind", "pos")

    def __init__(self, text: str, kind: str, pos: int):
        self.text = text
        self.kind = kind  # kw | ident | number | string | sym
        self.pos = pos

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"_Tok({self.text!r}, {self.kind})"


def _lex(text: str) -> list[_Tok]:
    tokens: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise SqlSyntaxError(f"cannot tokenize {text[pos:pos + 10]!r}", pos)
        raw = m.group(1)
        pos = m.end()
        if raw[0] in "'\"":
            quote = raw[0]
            body = raw[1:-1].replace(quote * 2, quote)
            tokens.append(_Tok(body, "string", m.start(1)))
        elif raw[0].isdigit() or raw[0] == ".":
            tokens.append(_Tok(raw, "number", m.start(1)))
        elif raw[0].isalpha() or raw[0] == "_":
            low = raw.lower()
            if low == "order_by":
                tokens.append(_Tok("order", "kw", m.start(1)))
                tokens.append(_Tok("by", "kw", m.start(1)))
            elif low == "group_by":
                tokens.append(_Tok("group", "kw", m.start(1)))
                tokens.append(_Tok("by", "kw", m.start(1)))
            elif low in _KEYWORDS and "." not in raw:
                tokens.append(_Tok(low, "kw", m.start(1)))
            else:
                tokens.append(_Tok(raw, "ident", m.start(1)))
        elif raw == ";":
            continue
        else:
            if raw == "<>":
                raw = "!="
            tokens.append(_Tok(raw, "sym", m.start(1)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Tok], source: str):
        self.toks = tokens
        self.i = 0
        self.source = source

    # -- stream helpers -------------------------------------------------

    def peek(self, offset: int = 0) -> Optional[_Tok]:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def at_kw(self, *words: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == "kw" and t.text in words

    def at_sym(self, *syms: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == "sym" and t.text in syms

    def take(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise SqlSyntaxError("unexpected end of input", len(self.source))
        self.i += 1
        return t

    def expect_kw(self, word: str) -> _Tok:
        t = self.peek()
        if t is None or t.kind != "kw" or t.text != word:
            pos = t.pos if t else len(self.source)
            raise SqlSyntaxError("unexpected token", pos, expected=(word.upper(),))
        return self.take()

    def expect_sym(self, sym: str) -> _Tok:
        t = self.peek()
        if t is None or t.kind != "sym" or t.text != sym:
            pos = t.pos if t else len(self.source)
            raise SqlSyntaxError("unexpected token", pos, expected=(sym,))
        return self.take()

    # -- grammar --------------------------------------------------------

    def query(self) -> SqlAst:
        left = self.unit()
        if self.at_kw("intersect", "union", "except"):
            op = self.take().text
            right = self.unit()
            return SqlAst(left=left, set_op=op, right=right)
        return SqlAst(left=left)

    def unit(self) -> SelectQuery:
        self.expect_kw("select")
        distinct_all = False
        if self.at_kw("distinct"):
            self.take()
            distinct_all = True
        items = [self.select_item(distinct_all)]
        while self.at_sym(","):
            self.take()
            items.append(self.select_item(False))

        self.expect_kw("from")
        tables, aliases, joins = self.from_clause()

        where = group_by = having = order_by = limit = None
        group_cols: tuple[ColumnRef, ...] = ()
        if self.at_kw("where"):
            self.take()
            where = self.cond_or(aliases)
        if self.at_kw("group"):
            self.take()
            self.expect_kw("by")
            cols = [self.column_ref(aliases)]
            while self.at_sym(","):
                self.take()
                cols.append(self.column_ref(aliases))
            group_cols = tuple(cols)
        if self.at_kw("having"):
            self.take()
            having = self.cond_or(aliases)
        if self.at_kw("order"):
            self.take()
            self.expect_kw("by")
            order_by = self.order_spec(aliases)
        if self.at_kw("limit"):
            self.take()
            t = self.take()
            if t.kind != "number" or "." in t.text or "e" in t.text.lower():
                raise SqlSyntaxError("LIMIT takes an integer", t.pos,
                                     expected=("<integer>",))
            limit = int(t.text)

        q = SelectQuery(
            select=tuple(items),
            from_tables=tuple(tables),
            joins=tuple(joins),
            where=where,
            group_by=group_cols,
            having=having,
            order_by=order_by,
            limit=limit,
        )
        # Select items are parsed before FROM introduces aliases, so alias
        # qualifiers are rewritten in a post-pass over the whole unit.
        if aliases:
            q = _substitute_aliases(q, aliases)
        return q

    def select_item(self, distinct: bool) -> SelectItem:
        # Aggregator names are not reserved words; an identifier followed by
        # "(" is treated as an aggregate call.
        t = self.peek()
        if (t is not None and t.kind == "ident" and t.text.lower() in AGGREGATORS
                and self.at_sym_at(1, "(")):
            agg = self.take().text.lower()
            self.expect_sym("(")
            inner_distinct = False
            if self.at_kw("distinct"):
                self.take()
                inner_distinct = True
            expr = self.column_expr({})
            self.expect_sym(")")
            return SelectItem(expr=expr, agg=agg, distinct=inner_distinct)
        return SelectItem(expr=self.column_expr({}), distinct=distinct)

    def at_sym_at(self, offset: int, sym: str) -> bool:
        t = self.peek(offset)
        return t is not None and t.kind == "sym" and t.text == sym

    def from_clause(self) -> tuple[list[str], dict[str, str], list[JoinEdge]]:
        tables: list[str] = []
        aliases: dict[str, str] = {}
        joins: list[JoinEdge] = []

        def one_table() -> str:
            t = self.take()
            if t.kind != "ident":
                raise SqlSyntaxError("expected table name", t.pos,
                                     expected=("<identifier>",))
            name = t.text
            if self.at_kw("as"):
                self.take()
                a = self.take()
                aliases[a.text.lower()] = name
            elif self.peek() is not None and self.peek().kind == "ident" and not self.at_kw():
                # bare alias: FROM head h
                nxt = self.peek()
                if nxt.text.lower() not in ("join",):
                    aliases[self.take().text.lower()] = name
            return name

        tables.append(one_table())
        while True:
            if self.at_sym(","):
                self.take()
                tables.append(one_table())
                continue
            if self.at_kw("join"):
                self.take()
                tables.append(one_table())
                self.expect_kw("on")
                left = self.column_ref(aliases)
                self.expect_sym("=")
                right = self.column_ref(aliases)
                joins.append(JoinEdge(left.table or "", left.column,
                                      right.table or "", right.column))
                continue
            break
        return tables, aliases, joins

    def column_ref(self, aliases: dict[str, str]) -> ColumnRef:
        t = self.take()
        if t.kind == "sym" and t.text == "*":
            return ColumnRef("*")
        if t.kind != "ident":
            raise SqlSyntaxError("expected column reference", t.pos,
                                 expected=("<identifier>",))
        if "." in t.text:
            table, col = t.text.split(".", 1)
            table = aliases.get(table.lower(), table)
            return ColumnRef(col, table)
        return ColumnRef(t.text)

    def column_expr(self, aliases: dict[str, str]):
        t = self.peek()
        if t is not None and t.kind == "sym" and t.text == "*":
            self.take()
            return ColumnRef("*")
        left = self.column_ref(aliases)
        if self.at_sym("+", "-", "*", "/"):
            # "*" here is arithmetic, not a star item: a bare star is never
            # followed by an operator in this subset.
            op = self.take().text
            right = self.column_ref(aliases)
            return Calc(left, op, right)
        return left

    # conditions: OR is weaker than AND; parentheses group
    def cond_or(self, aliases: dict[str, str]) -> Cond:
        node = self.cond_and(aliases)
        while self.at_kw("or"):
            self.take()
            node = BoolOp("or", node, self.cond_and(aliases))
        return node

    def cond_and(self, aliases: dict[str, str]) -> Cond:
        node = self.cond_atom(aliases)
        while self.at_kw("and"):
            self.take()
            node = BoolOp("and", node, self.cond_atom(aliases))
        return node

    def cond_atom(self, aliases: dict[str, str]) -> Cond:
        if self.at_sym("("):
            nxt = self.peek(1)
            if nxt is not None and not (nxt.kind == "kw" and nxt.text == "select"):
                self.take()
                node = self.cond_or(aliases)
                self.expect_sym(")")
                return node

        left_agg = None
        t = self.peek()
        if (t is not None and t.text.lower() in AGGREGATORS
                and self.at_sym_at(1, "(")):
            left_agg = self.take().text.lower()
            self.expect_sym("(")
            left = self.column_expr(aliases)
            self.expect_sym(")")
        else:
            left = self.column_expr(aliases)

        negated = False
        if self.at_kw("not"):
            self.take()
            negated = True

        if self.at_kw("between"):
            self.take()
            low = self.literal()
            self.expect_kw("and")
            high = self.literal()
            return Condition(left, "between", ValueRange(low, high), left_agg)
        if self.at_kw("like"):
            self.take()
            return Condition(left, "like", self.literal(), left_agg)
        if self.at_kw("in"):
            self.take()
            op = "not in" if negated else "in"
            self.expect_sym("(")
            rhs = self.query()
            self.expect_sym(")")
            return Condition(left, op, rhs, left_agg)
        if negated:
            t = self.peek()
            pos = t.pos if t else len(self.source)
            raise SqlSyntaxError("NOT is only supported before IN", pos,
                                 expected=("IN",))

        t = self.peek()
        if t is None or not (t.kind == "sym" and t.text in ("=", "!=", ">", ">=", "<", "<=")):
            pos = t.pos if t else len(self.source)
            raise SqlSyntaxError("expected comparison operator", pos,
                                 expected=("=", "!=", ">", ">=", "<", "<=",
                                           "LIKE", "IN", "BETWEEN"))
        op = self.take().text

        t = self.peek()
        if t is not None and t.kind == "sym" and t.text == "(":
            self.take()
            rhs = self.query()
            self.expect_sym(")")
            return Condition(left, op, rhs, left_agg)
        if t is not None and (t.kind in ("number", "string")
                              or (t.kind == "sym" and t.text == "-"
                                  and self.peek(1) is not None
                                  and self.peek(1).kind == "number")):
            return Condition(left, op, self.literal(), left_agg)
        rhs_col = self.column_expr(aliases)
        return Condition(left, op, rhs_col, left_agg)

    def literal(self) -> Literal:
        neg = False
        if self.at_sym("-"):
            self.take()
            neg = True
        t = self.take()
        if t.kind == "number":
            is_float = "." in t.text or "e" in t.text.lower()
            val = float(t.text) if is_float else int(t.text)
            return Literal(-val if neg else val)
        if t.kind == "string":
            if neg:
                raise SqlSyntaxError("cannot negate a string", t.pos)
            return Literal(t.text)
        raise SqlSyntaxError("expected literal value", t.pos,
                             expected=("<number>", "<string>"))

    def order_spec(self, aliases: dict[str, str]) -> OrderSpec:
        agg = None
        t = self.peek()
        if (t is not None and t.text.lower() in AGGREGATORS
                and self.at_sym_at(1, "(")):
            agg = self.take().text.lower()
            self.expect_sym("(")
            expr = self.column_expr(aliases)
            self.expect_sym(")")
        else:
            expr = self.column_expr(aliases)
        direction = "asc"
        if self.at_kw("asc", "desc"):
            direction = self.take().text
        if self.at_sym(","):
            t = self.peek()
            raise SqlSyntaxError("multiple sort keys are not supported", t.pos)
        return OrderSpec(expr=expr, direction=direction, agg=agg)


def _substitute_aliases(q: SelectQuery, aliases: dict[str, str]) -> SelectQuery:
    def fix_ref(ref: ColumnRef) -> ColumnRef:
        if ref.table and ref.table.lower() in aliases:
            return ColumnRef(ref.column, aliases[ref.table.lower()])
        return ref

    def fix_expr(e):
        if isinstance(e, Calc):
            return Calc(fix_ref(e.left), e.op, fix_ref(e.right))
        return fix_ref(e)

    def fix_cond(c: Optional[Cond]) -> Optional[Cond]:
        if c is None:
            return None
        if isinstance(c, BoolOp):
            return BoolOp(c.op, fix_cond(c.left), fix_cond(c.right))
        right = c.right
        if isinstance(right, (ColumnRef, Calc)):
            right = fix_expr(right)
        return Condition(fix_expr(c.left), c.op, right, c.left_agg)

    order = q.order_by
    if order is not None:
        order = OrderSpec(fix_expr(order.expr), order.direction, order.agg)
    return SelectQuery(
        select=tuple(SelectItem(fix_expr(it.expr), it.agg, it.distinct)
                     for it in q.select),
        from_tables=q.from_tables,
        joins=q.joins,
        where=fix_cond(q.where),
        group_by=tuple(fix_ref(c) for c in q.group_by),
        having=fix_cond(q.having),
        order_by=order,
        limit=q.limit,
    )


# ---------------------------------------------------------------------------
# Schema resolution
# ---------------------------------------------------------------------------


def _resolve_unit(q: SelectQuery, schema) -> SelectQuery:
    """Validate identifiers against a schema, attribute every column
    reference to its owning table, and normalize the table list and join
    edges to the canonical form the emitter produces: tables in sorted
    order, joins on the foreign-key path over the referenced tables."""
    from .schema import Disconnected, join_path

    table_map = {}
    for name in q.from_tables:
        t = schema.find_table(name)
        if t is None:
            raise UnknownIdentifierError(
                name, difflib.get_close_matches(name, [x.name for x in schema.tables], 3, 0.4)
            )
        table_map[name.lower()] = t

    def fix_ref(ref: ColumnRef) -> ColumnRef:
        if ref.is_star:
            return ref
        if ref.table:
            t = table_map.get(ref.table.lower())
            if t is None:
                raise UnknownIdentifierError(
                    ref.table, sorted(x.name for x in table_map.values()))
            if t.find_column(ref.column) is None:
                raise UnknownIdentifierError(
                    ref.render(), difflib.get_close_matches(
                        ref.column, [c.name for c in t.columns], 3, 0.4))
            return ColumnRef(ref.column, t.name)
        owners = [t for t in table_map.values() if t.find_column(ref.column)]
        if not owners:
            all_cols = sorted({c.name for t in table_map.values() for c in t.columns})
            raise UnknownIdentifierError(
                ref.column, difflib.get_close_matches(ref.column, all_cols, 3, 0.4))
        if len(owners) > 1:
            raise UnknownIdentifierError(
                ref.column, sorted(f"{t.name}.{ref.column}" for t in owners))
        return ColumnRef(ref.column, owners[0].name)

    def fix_expr(e):
        if isinstance(e, Calc):
            return Calc(fix_ref(e.left), e.op, fix_ref(e.right))
        return fix_ref(e)

    def fix_cond(c: Optional[Cond]) -> Optional[Cond]:
        if c is None:
            return None
        if isinstance(c, BoolOp):
            return BoolOp(c.op, fix_cond(c.left), fix_cond(c.right))
        right = c.right
        if isinstance(right, (ColumnRef, Calc)):
            right = fix_expr(right)
        elif isinstance(right, SqlAst):
            inner_right = (_resolve_unit(right.right, schema)
                           if right.set_op else None)
            right = SqlAst(left=_resolve_unit(right.left, schema),
                           set_op=right.set_op, right=inner_right)
        return Condition(fix_expr(c.left), c.op, right, c.left_agg)

    order = q.order_by
    if order is not None:
        order = OrderSpec(fix_expr(order.expr), order.direction, order.agg)

    from_tables = tuple(table_map[t.lower()].name for t in q.from_tables)
    joins = q.joins
    if len(from_tables) > 1:
        try:
            joins = tuple(join_path(schema, from_tables))
            from_tables = tuple(sorted(from_tables))
        except Disconnected:
            log.warning("no foreign-key path over %s; keeping parsed joins",
                        q.from_tables)
    return SelectQuery(
        select=tuple(SelectItem(fix_expr(it.expr), it.agg, it.distinct)
                     for it in q.select),
        from_tables=from_tables,
        joins=joins,
        where=fix_cond(q.where),
        group_by=tuple(fix_ref(c) for c in q.group_by),
        having=fix_cond(q.having),
        order_by=order,
        limit=q.limit,
    )


def parse_sql(text: str, schema=None) -> SqlAst:
    """Parse a query into a tree.

    Args:
        text: the SQL text.
        schema: optional schema; when given, identifiers are validated
            (raising UnknownIdentifierError), column references are
            attributed to their owning table, and the table list and ON
            edges are normalized to sorted order over the foreign-key
            join path.

    Raises:
        SqlSyntaxError: malformed input, with position and expectations.
        UnknownIdentifierError: schema supplied and a name does not resolve.
    """
    tokens = _lex(text)
    if not tokens:
        raise SqlSyntaxError("empty input", 0, expected=("SELECT",))
    p = _Parser(tokens, text)
    ast = p.query()
    if p.peek() is not None:
        raise SqlSyntaxError(f"trailing input {p.peek().text!r}", p.peek().pos)
    if schema is not None:
        left = _resolve_unit(ast.left, schema)
        right = _resolve_unit(ast.right, schema) if ast.set_op else None
        ast = SqlAst(left=left, set_op=ast.set_op, right=right)
    if not is_canonical(ast):
        log.warning("non-canonical query: LIMIT without ORDER BY")
    return ast
