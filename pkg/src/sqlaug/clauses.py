"""Clause decomposition and question composition.

A query splits into a small closed set of clause kinds along its keywords:
HAVING bundles with GROUP BY, LIMIT with ORDER BY, a nested comparison with
its inner query, and a bare GROUP BY merges into SELECT or ORDER BY
(whichever holds the aggregate; SELECT on a tie).  Each clause is translated
to a natural-language fragment by a pluggable translator, and the fragments
are stitched together in execution order (WHERE, GROUP BY+HAVING, SELECT,
ORDER BY+LIMIT) rather than source order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .ast import (
    Calc,
    ColumnRef,
    Cond,
    BoolOp,
    Condition,
    Literal,
    SelectQuery,
    SqlAst,
    SqlToken,
    ValueRange,
    sql_tokens,
    S_FROM,
    S_GROUP,
    S_HAVING,
    S_LIMIT,
    S_ORDER,
    S_SELECT,
    S_SETOP,
    S_WHERE,
)
from .schema import Schema, _naturalize

K_SELECT = "SELECT"
K_SELECT_GROUP = "SELECT+GROUP_BY"
K_WHERE = "WHERE"
K_WHERE_NESTED = "WHERE+NESTED_SELECT"
K_GROUP_HAVING = "GROUP_BY+HAVING"
K_ORDER = "ORDER_BY"
K_ORDER_LIMIT = "ORDER_BY+LIMIT"
K_ORDER_GROUP = "ORDER_BY+GROUP_BY"
K_SET_OP = "SET_OP"

CLAUSE_KINDS = (
    K_SELECT, K_SELECT_GROUP, K_WHERE, K_WHERE_NESTED, K_GROUP_HAVING,
    K_ORDER, K_ORDER_LIMIT, K_ORDER_GROUP, K_SET_OP,
)

# Composition rank: WHERE, then GROUP BY+HAVING, then SELECT, then ORDER BY.
_KIND_RANK = {
    K_WHERE: 0,
    K_WHERE_NESTED: 0,
    K_GROUP_HAVING: 1,
    K_SELECT: 2,
    K_SELECT_GROUP: 2,
    K_ORDER: 3,
    K_ORDER_LIMIT: 3,
    K_ORDER_GROUP: 3,
    K_SET_OP: 4,
}

_WH_WORDS = frozenset(
    ["what", "which", "who", "whom", "whose", "where", "when", "how"])


class UnsupportedClauseKind(ValueError):
    """The translator has no handler for this clause kind."""


class TranslationFailed(RuntimeError):
    """The translator accepted the clause but failed to produce text."""


class EmptySubquestionList(ValueError):
    """compose() requires at least one fragment."""


@dataclass(frozen=True)
class Element:
    """A database element referenced by a clause: a column, a table, or a
    literal value.  ``key`` identifies it within the query; ``text`` is
    the phrase to look for in a natural-language question."""

    etype: str  # "column" | "table" | "value"
    key: str
    text: str


@dataclass
class Clause:
    """One decomposed fragment of a query.

    ``tokens`` is the clause's slice of the canonical token stream (the
    SELECT clause also carries the FROM tokens); ``span`` holds each
    token's position in that stream; ``depth`` is 1 when the clause embeds
    a nested subquery; ``payload`` is the structured content the template
    translator fills from; ``elements`` lists the DB elements the clause
    mentions (used by question alignment).
    """

    kind: str
    tokens: tuple[SqlToken, ...]
    span: tuple[int, ...]
    unit: int = 0
    depth: int = 0
    payload: dict = field(default_factory=dict)
    elements: tuple[Element, ...] = ()

    def key(self) -> str:
        """Slot-normalized token text: columns/tables/values become
        placeholders so differently-bound clauses of one shape share it."""
        parts = []
        for tok in self.tokens:
            if tok.section == S_FROM:
                continue
            if tok.ttype == "column":
                parts.append("COLUMN")
            elif tok.ttype == "table":
                parts.append("TABLE")
            elif tok.ttype == "value":
                parts.append("VALUE")
            else:
                parts.append(tok.text.upper())
        return " ".join(parts)

    def text_key(self) -> str:
        """Concrete lowercase token text, used to look up learned
        paraphrases that only apply to one specific clause."""
        return " ".join(t.text for t in self.tokens).lower()


@dataclass(frozen=True)
class Subquestion:
    text: str
    kind: str
    variant: Optional[int] = None

    def __post_init__(self):
        if not self.text or self.text != self.text.strip():
            raise ValueError("subquestion text must be nonempty and trimmed")


# ---------------------------------------------------------------------------
# Payload builders (structured clause content for templates)
# ---------------------------------------------------------------------------


def _nat_col(ref: ColumnRef, schema: Optional[Schema]) -> str:
    if ref.column == "*":
        return "*"
    if schema is not None and ref.table:
        return schema.natural(ref.table, ref.column)
    return _naturalize(ref.column)


def _nat_table(name: str, schema: Optional[Schema]) -> str:
    if schema is not None:
        return schema.natural(name)
    return _naturalize(name)


def _expr_payload(expr, schema: Optional[Schema]) -> dict:
    if isinstance(expr, Calc):
        return {"kind": "calc", "column": _nat_col(expr.left, schema),
                "op": expr.op, "column2": _nat_col(expr.right, schema)}
    return {"kind": "column", "column": _nat_col(expr, schema)}


def _value_text(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    return str(value)


def _cond_payloads(cond: Cond, q: SelectQuery, schema: Optional[Schema],
                   connector: Optional[str] = None) -> list[dict]:
    if isinstance(cond, BoolOp):
        left = _cond_payloads(cond.left, q, schema, connector)
        right = _cond_payloads(cond.right, q, schema, cond.op)
        return left + right
    assert isinstance(cond, Condition)
    entry = _expr_payload(cond.left, schema)
    if entry["kind"] == "calc":
        entry["op_lhs"] = entry.pop("op")
    entry["connector"] = connector
    entry["op"] = cond.op
    entry["agg"] = cond.left_agg
    if isinstance(cond.right, ValueRange):
        entry["low"] = _value_text(cond.right.low.value)
        entry["high"] = _value_text(cond.right.high.value)
    elif isinstance(cond.right, Literal):
        value = cond.right.value
        if cond.op == "like" and isinstance(value, str):
            entry["value"] = value.strip("%")
        else:
            entry["value"] = _value_text(value)
    elif isinstance(cond.right, Calc):
        entry["rhs_calc"] = _expr_payload(cond.right, schema)
    elif isinstance(cond.right, ColumnRef):
        entry["rhs_column"] = _nat_col(cond.right, schema)
    elif isinstance(cond.right, SqlAst):
        entry["inner"] = _unit_payload(cond.right.left, schema)
    return [entry]


def _select_payload(q: SelectQuery, schema: Optional[Schema]) -> dict:
    items = []
    for item in q.select:
        entry = _expr_payload(item.expr, schema)
        entry["agg"] = item.agg
        entry["distinct"] = item.distinct
        items.append(entry)
    return {"items": items,
            "tables": [_nat_table(t, schema) for t in q.from_tables]}


def _order_payload(q: SelectQuery, schema: Optional[Schema]) -> dict:
    spec = q.order_by
    entry = _expr_payload(spec.expr, schema)
    entry["agg"] = spec.agg
    entry["direction"] = spec.direction
    entry["limit"] = q.limit
    return entry


def _unit_payload(q: SelectQuery, schema: Optional[Schema]) -> dict:
    """Whole-unit payload used for embedded (nested) queries."""
    payload = {"select": _select_payload(q, schema)}
    if q.where is not None:
        payload["conds"] = _cond_payloads(q.where, q, schema)
    if q.group_by:
        payload["group"] = _nat_col(q.group_by[0], schema)
    if q.having is not None:
        payload["having"] = _cond_payloads(q.having, q, schema)[0]
    if q.order_by is not None:
        payload["order"] = _order_payload(q, schema)
    return payload


# ---------------------------------------------------------------------------
# Element collectors (mirror the payload builders, keeping SQL identities)
# ---------------------------------------------------------------------------


def _col_element(ref: ColumnRef, schema: Optional[Schema]) -> list[Element]:
    if ref.column == "*":
        return []
    key = f"col:{(ref.table or '').lower()}.{ref.column.lower()}"
    return [Element("column", key, _nat_col(ref, schema))]


def _table_element(name: str, schema: Optional[Schema]) -> Element:
    return Element("table", f"tab:{name.lower()}", _nat_table(name, schema))


def _value_element(value) -> Element:
    if isinstance(value, str):
        value = value.strip("%")
    text = _value_text(value)
    return Element("value", f"val:{text.lower()}", text)


def _expr_elements(expr, schema: Optional[Schema]) -> list[Element]:
    if isinstance(expr, Calc):
        return (_col_element(expr.left, schema)
                + _col_element(expr.right, schema))
    return _col_element(expr, schema)


def _cond_elements(cond: Cond, q: SelectQuery,
                   schema: Optional[Schema]) -> list[Element]:
    if isinstance(cond, BoolOp):
        return (_cond_elements(cond.left, q, schema)
                + _cond_elements(cond.right, q, schema))
    assert isinstance(cond, Condition)
    out = _expr_elements(cond.left, schema)
    if isinstance(cond.right, ValueRange):
        out.append(_value_element(cond.right.low.value))
        out.append(_value_element(cond.right.high.value))
    elif isinstance(cond.right, Literal):
        out.append(_value_element(cond.right.value))
    elif isinstance(cond.right, (ColumnRef, Calc)):
        out.extend(_expr_elements(cond.right, schema))
    elif isinstance(cond.right, SqlAst):
        for inner in cond.right.units():
            out.extend(_unit_elements(inner, schema))
    return out


def _unit_elements(q: SelectQuery, schema: Optional[Schema]) -> list[Element]:
    out: list[Element] = []
    for item in q.select:
        out.extend(_expr_elements(item.expr, schema))
    out.extend(_table_element(t, schema) for t in q.from_tables)
    if q.where is not None:
        out.extend(_cond_elements(q.where, q, schema))
    for col in q.group_by:
        out.extend(_col_element(col, schema))
    if q.having is not None:
        out.extend(_cond_elements(q.having, q, schema))
    if q.order_by is not None:
        out.extend(_expr_elements(q.order_by.expr, schema))
    if q.limit is not None:
        out.append(_value_element(q.limit))
    return out


def _dedup_elements(elements: list[Element]) -> tuple[Element, ...]:
    seen = set()
    out = []
    for e in elements:
        if e.key not in seen:
            seen.add(e.key)
            out.append(e)
    return tuple(out)


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


def decompose(ast: SqlAst, schema: Optional[Schema] = None) -> list[Clause]:
    """Split a query into keyword-bundled clauses in source order.

    The optional schema supplies natural column/table names for the clause
    payloads; without it, names are derived from the SQL identifiers.
    """
    stream = sql_tokens(ast)
    clauses: list[Clause] = []

    for unit_index, q in enumerate(ast.units()):
        positions: dict[str, list[int]] = {}
        for pos, tok in enumerate(stream):
            if tok.unit == unit_index and tok.section != S_SETOP:
                positions.setdefault(tok.section, []).append(pos)

        def take(*sections: str) -> tuple[tuple[SqlToken, ...], tuple[int, ...]]:
            span = sorted(p for s in sections for p in positions.get(s, []))
            return tuple(stream[p] for p in span), tuple(span)

        bare_group = bool(q.group_by) and q.having is None
        agg_in_select = any(item.agg for item in q.select)
        agg_in_order = q.order_by is not None and q.order_by.agg is not None
        group_into_order = bare_group and not agg_in_select and agg_in_order

        select_elements = [e for item in q.select
                           for e in _expr_elements(item.expr, schema)]
        select_elements += [_table_element(t, schema) for t in q.from_tables]

        # SELECT clause (FROM rides along; bare GROUP BY may merge in)
        if bare_group and not group_into_order:
            tokens, span = take(S_SELECT, S_FROM, S_GROUP)
            payload = _select_payload(q, schema)
            payload["group"] = _nat_col(q.group_by[0], schema)
            elements = select_elements + _col_element(q.group_by[0], schema)
            clauses.append(Clause(K_SELECT_GROUP, tokens, span, unit_index,
                                  payload=payload,
                                  elements=_dedup_elements(elements)))
        else:
            tokens, span = take(S_SELECT, S_FROM)
            clauses.append(Clause(K_SELECT, tokens, span, unit_index,
                                  payload=_select_payload(q, schema),
                                  elements=_dedup_elements(select_elements)))

        if q.where is not None:
            tokens, span = take(S_WHERE)
            nested = any(t.depth > 0 for t in tokens)
            kind = K_WHERE_NESTED if nested else K_WHERE
            payload = {"conds": _cond_payloads(q.where, q, schema)}
            elements = _cond_elements(q.where, q, schema)
            clauses.append(Clause(kind, tokens, span, unit_index,
                                  depth=1 if nested else 0, payload=payload,
                                  elements=_dedup_elements(elements)))

        if q.having is not None:
            tokens, span = take(S_GROUP, S_HAVING)
            payload = {"group": _nat_col(q.group_by[0], schema),
                       "having": _cond_payloads(q.having, q, schema)[0]}
            elements = (_col_element(q.group_by[0], schema)
                        + _cond_elements(q.having, q, schema))
            clauses.append(Clause(K_GROUP_HAVING, tokens, span, unit_index,
                                  payload=payload,
                                  elements=_dedup_elements(elements)))

        if q.order_by is not None:
            payload = _order_payload(q, schema)
            elements = _expr_elements(q.order_by.expr, schema)
            if q.limit is not None:
                kind = K_ORDER_LIMIT
                sections = ((S_GROUP, S_ORDER, S_LIMIT) if group_into_order
                            else (S_ORDER, S_LIMIT))
                elements.append(_value_element(q.limit))
            elif group_into_order:
                kind = K_ORDER_GROUP
                sections = (S_GROUP, S_ORDER)
            else:
                kind = K_ORDER
                sections = (S_ORDER,)
            if group_into_order:
                payload["group"] = _nat_col(q.group_by[0], schema)
                elements.extend(_col_element(q.group_by[0], schema))
            tokens, span = take(*sections)
            clauses.append(Clause(kind, tokens, span, unit_index,
                                  payload=payload,
                                  elements=_dedup_elements(elements)))

        if unit_index == 0 and ast.set_op:
            span = tuple(p for p, t in enumerate(stream)
                         if t.section == S_SETOP)
            tokens = tuple(stream[p] for p in span)
            clauses.append(Clause(K_SET_OP, tokens, span, unit_index,
                                  payload={"op": ast.set_op}))

    clauses.sort(key=lambda c: c.span[0])
    return clauses


def execution_order(clauses: Sequence[Clause]) -> list[Clause]:
    """Stable-sort one decomposition into composition order: WHERE, then
    GROUP BY+HAVING, then SELECT, then ORDER BY; a set operation's second
    unit follows the connective."""
    return sorted(clauses, key=lambda c: (c.unit, 1 if c.kind == K_SET_OP else 0,
                                          _KIND_RANK[c.kind]))


# ---------------------------------------------------------------------------
# Translation and composition
# ---------------------------------------------------------------------------


def translate_clause(clause: Clause, translator, variant: Optional[int] = None
                     ) -> Subquestion:
    """Run one clause through a translator, normalizing its errors."""
    if not translator.supports(clause.kind):
        raise UnsupportedClauseKind(clause.kind)
    try:
        text = translator.translate(clause, variant)
    except (UnsupportedClauseKind, TranslationFailed):
        raise
    except Exception as exc:
        raise TranslationFailed(str(exc)) from exc
    return Subquestion(text=text.strip(), kind=clause.kind, variant=variant)


def _is_interrogative(text: str) -> bool:
    first = text.split(None, 1)[0].lower() if text.strip() else ""
    return first in _WH_WORDS


def compose(subquestions: Sequence[Subquestion],
            clauses: Sequence[Clause]) -> str:
    """Join fragments with ", ", capitalize, and punctuate: "?" when the
    SELECT fragment asks a WH-question, else ".".

    For a set operation whose two SELECT fragments are textually equal,
    only the first is kept.  Adjacent duplicate words across a join
    boundary collapse to one.
    """
    if not subquestions:
        raise EmptySubquestionList("nothing to compose")
    if len(subquestions) != len(clauses):
        raise ValueError("subquestions and clauses must be parallel")

    pairs = list(zip(subquestions, clauses))

    select_kinds = (K_SELECT, K_SELECT_GROUP)
    selects = [(sq, cl) for sq, cl in pairs if cl.kind in select_kinds]
    if len(selects) == 2 and selects[0][0].text == selects[1][0].text:
        drop = selects[1]
        pairs = [p for p in pairs if p[1] is not drop[1]]

    words: list[str] = []
    fragments: list[str] = []
    for sq, _ in pairs:
        frag_words = sq.text.split()
        if words and frag_words and words[-1].lower() == frag_words[0].lower():
            frag_words = frag_words[1:]
        if not frag_words:
            continue
        words.extend(frag_words)
        fragments.append(" ".join(frag_words))

    if not fragments:
        raise EmptySubquestionList("all fragments collapsed to nothing")
    body = ", ".join(fragments)
    body = body[0].upper() + body[1:]
    first_select = selects[0][0].text if selects else ""
    return body + ("?" if _is_interrogative(first_select) else ".")


def sql_to_question(ast: SqlAst, translator, schema: Optional[Schema] = None,
                    variant: Union[int, Callable[[Clause], Optional[int]], None]
                    = None) -> str:
    """End-to-end: decompose, translate each clause, compose in execution
    order.  ``variant`` may be a single index applied to every clause or a
    callable choosing per clause."""
    ordered = execution_order(decompose(ast, schema))
    pick = variant if callable(variant) else (lambda c: variant)
    subqs = [translate_clause(c, translator, pick(c)) for c in ordered]
    return compose(subqs, ordered)
