"""Filling sketches against a schema to produce executable SQL.

A sketch's pattern fixes the query shape; filling binds its database slots:
columns (A, C), aggregators (AGG), arithmetic pairs (CALC), comparison
operators (OP), literals (V), and sort directions (DIR).  Column-level
choices form a mixed-radix space of slot digits; fills are sampled from it
uniformly without replacement (small spaces are enumerated exactly), then
operators and values are drawn per sampled assignment.  Everything is
deterministic given (sketch, schema, content, config).
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import math
import random
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

from .ast import (
    AGGREGATORS,
    Calc,
    ColumnRef,
    BoolOp,
    Cond,
    Condition,
    JoinEdge,
    Literal,
    OrderSpec,
    Pattern,
    SelectItem,
    SelectQuery,
    SqlAst,
    ValueRange,
    extract_pattern,
)
from .evaluate import EvalError, execute
from .grammar import SketchTree
from .schema import Column, DatabaseContent, Disconnected, Schema, join_path

log = logging.getLogger(__name__)

NUMERIC_TYPES = ("number", "boolean")

# operator pools per column type, in canonical order
_OPS_BY_TYPE = {
    "number": ("=", "!=", ">", ">=", "<", "<=", "between"),
    "boolean": ("=", "!="),
    "text": ("=", "!=", "like"),
    "time": ("=", "!=", ">", ">=", "<", "<=", "between"),
}
_COLUMN_OPS_BY_TYPE = {
    "number": ("=", "!=", ">", ">=", "<", "<="),
    "boolean": ("=", "!="),
    "text": ("=", "!="),
    "time": ("=", "!=", ">", ">=", "<", "<="),
}
_SCALAR_NESTED_OPS = _COLUMN_OPS_BY_TYPE
_ORDERING_OPS = ("=", "!=", ">", ">=", "<", "<=")
_MEMBER_OPS = ("in", "not in")
_ARITH_OPS = ("+", "-", "*", "/")
_LIMIT_POOL = (1, 2, 3)

# spaces up to this size are enumerated exhaustively; larger ones sampled
_ENUMERATE_LIMIT = 2048


class UnsupportedSketch(ValueError):
    """Pattern shape outside the supported query subset."""


@dataclass(frozen=True)
class FillConfig:
    rng_seed: int = 0
    max_fills_per_sketch_per_db: int = 8
    allow_value_perturbation: bool = False
    aggregators: tuple[str, ...] = AGGREGATORS
    attempts_per_fill: int = 40

    def __post_init__(self):
        if self.max_fills_per_sketch_per_db < 1:
            raise ValueError("max_fills_per_sketch_per_db must be >= 1")
        for agg in self.aggregators:
            if agg not in AGGREGATORS:
                raise ValueError(f"unknown aggregator {agg!r}")


def stable_seed(*parts) -> int:
    """Platform-stable seed derived from the given parts."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _pick(rng: random.Random, seq):
    """Version-stable uniform choice (random() is guaranteed stable)."""
    return seq[min(int(rng.random() * len(seq)), len(seq) - 1)]


def _digit(rng: random.Random, radix: int) -> int:
    return min(int(rng.random() * radix), radix - 1)


def _sample_indices(rng: random.Random, n: int, k: int) -> list[int]:
    """Version-stable sample without replacement, returned sorted."""
    indices = list(range(n))
    for i in range(k):
        j = i + _digit(rng, n - i)
        indices[i], indices[j] = indices[j], indices[i]
    return sorted(indices[:k])


# ---------------------------------------------------------------------------
# Pattern skeletons
# ---------------------------------------------------------------------------


@dataclass
class _CondSlot:
    lhs_kind: str            # "C" or "CALC"
    rhs_kind: str            # "V", "C", or "NESTED"
    inner_agg: bool = False  # nested subquery selects an aggregate
    connector: Optional[str] = None  # "and" / "or" before this condition


@dataclass
class _UnitSkeleton:
    select: list[tuple[str, bool]]  # (kind "A"|"CALC", aggregated?)
    conds: list[_CondSlot]
    group: bool = False
    having: bool = False
    order: Optional[str] = None  # None, "plain", or "agg"
    limit: bool = False

    @property
    def arity(self) -> int:
        return len(self.select)


@dataclass
class _Skeleton:
    units: list[_UnitSkeleton]
    set_op: Optional[str] = None


class _Cursor:
    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected: Optional[str] = None) -> str:
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise UnsupportedSketch(
                f"expected {expected or 'a token'} at position {self.i} "
                f"in pattern {' '.join(self.tokens)}")
        self.i += 1
        return tok


def parse_skeleton(pattern: Pattern) -> _Skeleton:
    """Structure a flat pattern; accepts the shapes fill_sketch can bind."""
    cur = _Cursor(pattern)
    units = [_parse_unit(cur)]
    set_op = None
    if cur.peek() in ("INTERSECT", "UNION", "EXCEPT"):
        set_op = cur.take().lower()
        units.append(_parse_unit(cur))
    if cur.peek() is not None:
        raise UnsupportedSketch(f"trailing tokens in pattern: {cur.peek()}")
    return _Skeleton(units=units, set_op=set_op)


def _parse_unit(cur: _Cursor) -> _UnitSkeleton:
    cur.take("SELECT")
    select: list[tuple[str, bool]] = []
    while True:
        tok = cur.peek()
        if tok == "A":
            cur.take()
            select.append(("A", False))
        elif tok == "AGG":
            cur.take()
            nxt = cur.peek()
            if nxt == "A":
                cur.take()
                select.append(("A", True))
            elif nxt == "CALC":
                cur.take()
                select.append(("CALC", True))
            else:
                raise UnsupportedSketch("AGG must be followed by A or CALC")
        elif tok == "CALC":
            cur.take()
            select.append(("CALC", False))
        else:
            break
    if not select:
        raise UnsupportedSketch("empty select list in pattern")

    skel = _UnitSkeleton(select=select, conds=[])
    if cur.peek() == "WHERE":
        cur.take()
        skel.conds.append(_parse_cond(cur, None))
        while cur.peek() in ("AND", "OR"):
            conn = cur.take().lower()
            skel.conds.append(_parse_cond(cur, conn))
    if cur.peek() == "GROUP_BY":
        cur.take()
        cur.take("C")
        skel.group = True
        if cur.peek() == "HAVING":
            cur.take()
            cur.take("AGG")
            cur.take("C")
            cur.take("OP")
            cur.take("V")
            skel.having = True
    if cur.peek() == "ORDER_BY":
        cur.take()
        if cur.peek() == "AGG":
            cur.take()
            skel.order = "agg"
        else:
            skel.order = "plain"
        cur.take("C")
        cur.take("DIR")
        if cur.peek() == "LIMIT":
            cur.take()
            cur.take("V")
            skel.limit = True
    return skel


def _parse_cond(cur: _Cursor, connector: Optional[str]) -> _CondSlot:
    tok = cur.peek()
    if tok == "C":
        cur.take()
        lhs = "C"
    elif tok == "CALC":
        cur.take()
        lhs = "CALC"
    else:
        raise UnsupportedSketch(f"condition must start with C or CALC, got {tok}")
    cur.take("OP")
    tok = cur.peek()
    if tok == "V":
        cur.take()
        return _CondSlot(lhs, "V", connector=connector)
    if tok == "C":
        cur.take()
        return _CondSlot(lhs, "C", connector=connector)
    if tok == "NESTED_OPEN":
        cur.take()
        cur.take("SELECT")
        inner_agg = False
        if cur.peek() == "AGG":
            cur.take()
            inner_agg = True
        cur.take("A")
        cur.take("NESTED_CLOSE")
        return _CondSlot(lhs, "NESTED", inner_agg=inner_agg, connector=connector)
    raise UnsupportedSketch(f"unsupported condition right side: {tok}")


# ---------------------------------------------------------------------------
# Slot spaces
# ---------------------------------------------------------------------------


def _agg_pool(col: Column, allowed: tuple[str, ...]) -> tuple[str, ...]:
    # sum/avg need numbers; count/max/min accept any type
    if col.ctype in NUMERIC_TYPES:
        return tuple(a for a in allowed if a in AGGREGATORS)
    return tuple(a for a in allowed if a in ("count", "max", "min"))


def _scalar_inner_pool(col: Column, allowed: tuple[str, ...]) -> tuple[str, ...]:
    if col.ctype in NUMERIC_TYPES:
        pool = ("max", "min", "sum", "avg")
    else:
        pool = ("max", "min")
    return tuple(a for a in pool if a in allowed)


@dataclass
class _Slot:
    """One column-level choice: a radix and a context-dependent pool.

    The pool function receives choices made for earlier slots; a sampled
    digit at or past the pool length rejects the whole draw.  Radix is an
    upper bound on pool size, so flat digit order equals nested-loop
    enumeration order.
    """

    name: str
    radix: int
    pool: Callable[[list], Sequence]


@dataclass
class _UnitAssignment:
    select: list  # per item: Column | (Column, agg) | (Column, Column) | ((l, r), agg)
    conds: list   # per cond: dict(lhs=..., rhs_col=..., inner=...)
    group: Optional[Column] = None
    having: Optional[tuple[Column, str]] = None
    order: Optional[tuple[Column, Optional[str]]] = None
    tables: tuple[str, ...] = ()
    joins: tuple[JoinEdge, ...] = ()


def _nonempty_columns(schema: Schema, content: DatabaseContent) -> list[Column]:
    cols = []
    for table in schema.tables:
        if content.table_rows(table.name):
            cols.extend(table.columns)
    return cols


def _unit_slots(skel: _UnitSkeleton, schema: Schema, content: DatabaseContent,
                cfg: FillConfig) -> Optional[list[_Slot]]:
    """Build the slot list for one unit, or None when some slot has no
    candidates at all (NoCompatibleColumns)."""
    columns = _nonempty_columns(schema, content)
    numeric = [c for c in columns if c.ctype == "number"]
    calc_pairs = [(a, b) for a in numeric for b in numeric
                  if (a.table, a.name) != (b.table, b.name)]
    with_values = [c for c in columns
                   if content.column_values(c.table, c.name)]
    agg_pairs = [(c, a) for c in columns for a in _agg_pool(c, cfg.aggregators)]
    calc_aggs = [a for a in ("sum", "avg", "max", "min") if a in cfg.aggregators]
    agg_calc_pairs = [(p, a) for p in calc_pairs for a in calc_aggs]
    nonpk_text = [c for c in columns
                  if c.ctype == "text" and not schema.is_primary(c)]

    # mixed plain/aggregate select lists need GROUP BY to stay well-defined,
    # and a grouped query admits exactly one plain item (the group key)
    has_agg = any(agg for _, agg in skel.select)
    plain_count = sum(1 for _, agg in skel.select if not agg)
    if has_agg and plain_count and not skel.group:
        log.debug("skipping mixed plain/aggregate select without GROUP BY")
        return None
    if skel.group and plain_count > 1:
        log.debug("skipping grouped select with %d plain items", plain_count)
        return None
    if skel.group and any(kind == "CALC" and not agg for kind, agg in skel.select):
        log.debug("skipping grouped select with a plain arithmetic item")
        return None
    if skel.order == "agg" and not skel.group and not has_agg:
        log.debug("skipping aggregate ORDER BY in a non-aggregate query")
        return None

    slots: list[_Slot] = []

    def fixed(pool):
        return lambda chosen: pool

    for i, (kind, aggregated) in enumerate(skel.select):
        if kind == "CALC" and aggregated:
            pool = agg_calc_pairs
        elif kind == "CALC":
            pool = calc_pairs
        elif aggregated:
            pool = agg_pairs
        else:
            pool = columns
        if not pool:
            return None
        slots.append(_Slot(f"sel{i}", len(pool), fixed(pool)))

    for j, cond in enumerate(skel.conds):
        if cond.lhs_kind == "CALC":
            lhs_pool = calc_pairs
        elif cond.rhs_kind == "V":
            lhs_pool = with_values
        else:
            lhs_pool = columns
        if not lhs_pool:
            return None
        slots.append(_Slot(f"lhs{j}", len(lhs_pool), fixed(lhs_pool)))
        lhs_index = len(slots) - 1

        if cond.rhs_kind == "C":
            def rhs_pool(chosen, li=lhs_index):
                lhs = chosen[li]
                if isinstance(lhs, tuple):  # CALC compares against a number
                    return numeric
                return [c for c in columns
                        if c.ctype == lhs.ctype
                        and (c.table, c.name) != (lhs.table, lhs.name)]
            slots.append(_Slot(f"rhs{j}", len(columns), rhs_pool))
        elif cond.rhs_kind == "NESTED":
            if cond.inner_agg:
                def inner_pool(chosen, li=lhs_index):
                    lhs = chosen[li]
                    if isinstance(lhs, tuple):
                        return ()
                    # scalar subquery aggregates the compared column itself
                    return [(lhs, a)
                            for a in _scalar_inner_pool(lhs, cfg.aggregators)]
                radix = max(len(AGGREGATORS), 1)
            else:
                def inner_pool(chosen, li=lhs_index):
                    lhs = chosen[li]
                    if isinstance(lhs, tuple):
                        return ()
                    return [(c, None) for c in with_values
                            if c.ctype == lhs.ctype
                            and (c.table, c.name) != (lhs.table, lhs.name)]
                radix = max(len(with_values), 1)
            slots.append(_Slot(f"inner{j}", radix, inner_pool))

    if skel.group:
        plain_positions = [i for i, (kind, agg) in enumerate(skel.select)
                           if not agg]
        def group_pool(chosen):
            if plain_positions:
                return [chosen[plain_positions[0]]]
            return nonpk_text or columns
        group_radix = 1 if plain_positions else len(nonpk_text or columns)
        slots.append(_Slot("group", group_radix, group_pool))
        group_index = len(slots) - 1

        if skel.having:
            if not agg_pairs:
                return None
            slots.append(_Slot("having", len(agg_pairs), fixed(agg_pairs)))

    if skel.order == "agg":
        if not agg_pairs:
            return None
        slots.append(_Slot("order", len(agg_pairs), fixed(agg_pairs)))
    elif skel.order == "plain":
        if skel.group:
            def order_pool(chosen, gi=group_index):
                return [(chosen[gi], None)]
            slots.append(_Slot("order", 1, order_pool))
        else:
            slots.append(_Slot("order", len(columns),
                               fixed([(c, None) for c in columns])))

    return slots


def _space_size(slots: list[_Slot]) -> int:
    n = 1
    for s in slots:
        n *= s.radix
    return n


def _decode(slots: list[_Slot], digits: Sequence[int]) -> Optional[list]:
    chosen: list = []
    for slot, digit in zip(slots, digits):
        pool = slot.pool(chosen)
        if digit >= len(pool):
            return None
        chosen.append(pool[digit])
    return chosen


def _iter_digits(slots: list[_Slot], prefix: list[int],
                 chosen: list) -> Iterator[tuple[int, ...]]:
    """All valid digit vectors in canonical nested-loop order."""
    depth = len(prefix)
    if depth == len(slots):
        yield tuple(prefix)
        return
    pool = slots[depth].pool(chosen)
    for digit in range(len(pool)):
        chosen.append(pool[digit])
        prefix.append(digit)
        yield from _iter_digits(slots, prefix, chosen)
        prefix.pop()
        chosen.pop()


def _assemble(skel: _UnitSkeleton, chosen: list, schema: Schema,
              join_cache: dict) -> Optional[_UnitAssignment]:
    i = 0
    select = chosen[i:i + len(skel.select)]
    i += len(skel.select)
    conds = []
    for cond in skel.conds:
        entry = {"lhs": chosen[i], "rhs_col": None, "inner": None}
        i += 1
        if cond.rhs_kind == "C":
            entry["rhs_col"] = chosen[i]
            i += 1
        elif cond.rhs_kind == "NESTED":
            entry["inner"] = chosen[i]
            i += 1
        conds.append(entry)
    group = None
    having = None
    if skel.group:
        group = chosen[i]
        i += 1
        if skel.having:
            having = chosen[i]
            i += 1
    order = None
    if skel.order:
        order = chosen[i]
        i += 1

    tables = set()

    def add(entry):
        if entry is None:
            return
        if isinstance(entry, Column):
            tables.add(entry.table)
        elif isinstance(entry, tuple):
            for part in entry:
                add(part)

    for item in select:
        add(item)
    for cond in conds:
        add(cond["lhs"])
        add(cond["rhs_col"])
    add(group)
    if having:
        add(having[0])
    if order:
        add(order[0])

    key = frozenset(tables)
    if key not in join_cache:
        try:
            join_cache[key] = tuple(join_path(schema, key))
        except Disconnected:
            join_cache[key] = None
    joins = join_cache[key]
    if joins is None:
        return None
    return _UnitAssignment(select=select, conds=conds, group=group,
                           having=having, order=order,
                           tables=tuple(sorted(tables)), joins=joins)


# ---------------------------------------------------------------------------
# Building ASTs from assignments
# ---------------------------------------------------------------------------


def _ref(col: Column) -> ColumnRef:
    return ColumnRef(column=col.name, table=col.table)


def _calc(pair: tuple[Column, Column], op: str) -> Calc:
    return Calc(left=_ref(pair[0]), op=op, right=_ref(pair[1]))


def _calc_value_pool(pair: tuple[Column, Column], op: str,
                     content: DatabaseContent) -> list:
    """Observed results of the arithmetic over the pair's rows.

    Only same-table pairs have row-aligned observations; cross-table pairs
    combine each side's distinct values positionally.
    """
    a, b = pair
    if a.table == b.table:
        table = content.schema.find_table(a.table)
        ia = next(i for i, c in enumerate(table.columns)
                  if c.name.lower() == a.name.lower())
        ib = next(i for i, c in enumerate(table.columns)
                  if c.name.lower() == b.name.lower())
        rows = [(r[ia], r[ib]) for r in content.table_rows(a.table)]
    else:
        rows = list(zip(content.column_values(a.table, a.name),
                        content.column_values(b.table, b.name)))
    values = []
    for va, vb in rows:
        if va is None or vb is None:
            continue
        if op == "+":
            values.append(va + vb)
        elif op == "-":
            values.append(va - vb)
        elif op == "*":
            values.append(va * vb)
        elif op == "/" and vb != 0:
            if isinstance(va, int) and isinstance(vb, int):
                values.append(math.trunc(va / vb))
            else:
                values.append(va / vb)
    return sorted(set(values), key=lambda v: (str(type(v)), v))


def _perturb(value, rng: random.Random):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return value
    scale = 1 + (-0.1 + 0.2 * rng.random())
    if isinstance(value, int):
        nudged = int(round(value * scale))
        return nudged if nudged != value or value == 0 else value + _pick(rng, (-1, 1))
    return round(value * scale, 4)


def _draw_value(col: Column, content: DatabaseContent, rng: random.Random,
                cfg: FillConfig):
    values = content.column_values(col.table, col.name)
    if not values:
        return None
    value = _pick(rng, values)
    if cfg.allow_value_perturbation and col.ctype == "number":
        value = _perturb(value, rng)
    return value


def _group_sizes(group_col: Column, content: DatabaseContent) -> list[int]:
    table = content.schema.find_table(group_col.table)
    idx = next(i for i, c in enumerate(table.columns)
               if c.name.lower() == group_col.name.lower())
    sizes: dict = {}
    for row in content.table_rows(group_col.table):
        sizes[row[idx]] = sizes.get(row[idx], 0) + 1
    return sorted(set(sizes.values()))


def _build_condition(slot: _CondSlot, chosen: dict, content: DatabaseContent,
                     rng: random.Random, cfg: FillConfig) -> Optional[Condition]:
    lhs = chosen["lhs"]
    if isinstance(lhs, tuple):  # CALC
        arith = _pick(rng, _ARITH_OPS)
        left = _calc(lhs, arith)
        if slot.rhs_kind == "V":
            pool = _calc_value_pool(lhs, arith, content)
            if not pool:
                return None
            return Condition(left=left, op=_pick(rng, _ORDERING_OPS),
                             right=Literal(_pick(rng, pool)))
        if slot.rhs_kind == "C":
            return Condition(left=left, op=_pick(rng, _ORDERING_OPS),
                             right=_ref(chosen["rhs_col"]))
        return None

    col: Column = lhs
    left = _ref(col)
    if slot.rhs_kind == "V":
        op = _pick(rng, _OPS_BY_TYPE[col.ctype])
        if op == "between":
            a = _draw_value(col, content, rng, cfg)
            b = _draw_value(col, content, rng, cfg)
            if a is None or b is None:
                return None
            low, high = sorted((a, b))
            return Condition(left=left, op="between",
                             right=ValueRange(Literal(low), Literal(high)))
        if op == "like":
            cell = _draw_value(col, content, rng, cfg)
            if not isinstance(cell, str) or not cell:
                return None
            return Condition(left=left, op="like", right=Literal(f"%{cell}%"))
        value = _draw_value(col, content, rng, cfg)
        if value is None:
            return None
        return Condition(left=left, op=op, right=Literal(value))

    if slot.rhs_kind == "C":
        op = _pick(rng, _COLUMN_OPS_BY_TYPE[col.ctype])
        return Condition(left=left, op=op, right=_ref(chosen["rhs_col"]))

    inner = chosen["inner"]
    if inner is None:
        return None
    inner_col, inner_agg = inner
    subquery = SqlAst(left=SelectQuery(
        select=(SelectItem(expr=_ref(inner_col), agg=inner_agg),),
        from_tables=(inner_col.table,),
    ))
    if inner_agg:
        op = _pick(rng, _SCALAR_NESTED_OPS[col.ctype])
    else:
        op = _pick(rng, _MEMBER_OPS)
    return Condition(left=left, op=op, right=subquery)


def _build_unit(skel: _UnitSkeleton, assignment: _UnitAssignment,
                content: DatabaseContent, rng: random.Random,
                cfg: FillConfig) -> Optional[SelectQuery]:
    items = []
    for (kind, aggregated), chosen in zip(skel.select, assignment.select):
        if kind == "CALC":
            if aggregated:
                pair, agg = chosen
                items.append(SelectItem(expr=_calc(pair, _pick(rng, _ARITH_OPS)),
                                        agg=agg))
            else:
                items.append(SelectItem(expr=_calc(chosen, _pick(rng, _ARITH_OPS))))
        elif aggregated:
            col, agg = chosen
            items.append(SelectItem(expr=_ref(col), agg=agg))
        else:
            items.append(SelectItem(expr=_ref(chosen)))

    where: Optional[Cond] = None
    for slot, chosen in zip(skel.conds, assignment.conds):
        cond = _build_condition(slot, chosen, content, rng, cfg)
        if cond is None:
            return None
        where = cond if where is None else BoolOp(op=slot.connector, left=where,
                                                  right=cond)

    group_by = ()
    having = None
    if skel.group:
        group_by = (_ref(assignment.group),)
        if skel.having:
            hcol, hagg = assignment.having
            if hagg == "count":
                pool = _group_sizes(assignment.group, content)
                if not pool:
                    return None
                value = _pick(rng, pool)
                op = _pick(rng, _ORDERING_OPS)
            else:
                value = _draw_value(hcol, content, rng, cfg)
                if value is None:
                    return None
                op = (_pick(rng, ("=", "!="))
                      if isinstance(value, str) else _pick(rng, _ORDERING_OPS))
            having = Condition(left=_ref(hcol), op=op, right=Literal(value),
                               left_agg=hagg)

    order_by = None
    limit = None
    if skel.order:
        ocol, oagg = assignment.order
        order_by = OrderSpec(expr=_ref(ocol),
                             direction=_pick(rng, ("asc", "desc")), agg=oagg)
        if skel.limit:
            limit = _pick(rng, _LIMIT_POOL)

    return SelectQuery(
        select=tuple(items),
        from_tables=assignment.tables,
        joins=assignment.joins,
        where=where,
        group_by=group_by,
        having=having,
        order_by=order_by,
        limit=limit,
    )


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def fill_sketch(sketch: Union[SketchTree, Pattern], schema: Schema,
                content: DatabaseContent, cfg: FillConfig) -> list[SqlAst]:
    """Bind a sketch's database slots against one schema.

    Returns at most cfg.max_fills_per_sketch_per_db queries, deterministic
    under cfg.rng_seed.  An unfillable sketch (no type-compatible or
    join-connected columns) yields an empty list and a log line.
    """
    pattern = sketch.pattern() if isinstance(sketch, SketchTree) else tuple(sketch)
    skeleton = parse_skeleton(pattern)

    if skeleton.set_op and skeleton.units[0].arity != skeleton.units[1].arity:
        log.debug("%s: set operation arity mismatch in pattern %s",
                  schema.db_id, " ".join(pattern))
        return []

    unit_slot_lists: list[list[_Slot]] = []
    for unit_skel in skeleton.units:
        unit_slots = _unit_slots(unit_skel, schema, content, cfg)
        if unit_slots is None:
            log.info("NoCompatibleColumns: %s cannot host pattern %s",
                     schema.db_id, " ".join(pattern))
            return []
        unit_slot_lists.append(unit_slots)

    rng = random.Random(stable_seed(cfg.rng_seed, schema.db_id, " ".join(pattern)))
    k = cfg.max_fills_per_sketch_per_db
    join_cache: dict = {}
    bounds = []
    offset = 0
    for unit_slots in unit_slot_lists:
        bounds.append((offset, offset + len(unit_slots)))
        offset += len(unit_slots)

    def decode_vector(digits) -> Optional[list[_UnitAssignment]]:
        assignments = []
        for unit_skel, unit_slots, (lo, hi) in zip(
                skeleton.units, unit_slot_lists, bounds):
            chosen = _decode(unit_slots, digits[lo:hi])
            if chosen is None:
                return None
            assignment = _assemble(unit_skel, chosen, schema, join_cache)
            if assignment is None:
                return None
            assignments.append(assignment)
        return assignments

    space = 1
    for unit_slots in unit_slot_lists:
        space *= _space_size(unit_slots)

    accepted: list[tuple[tuple[int, ...], list[_UnitAssignment]]] = []
    if space <= _ENUMERATE_LIMIT:
        valid = []
        per_unit = [list(_iter_digits(unit_slots, [], []))
                    for unit_slots in unit_slot_lists]
        for combo in itertools.product(*per_unit):
            digits = tuple(d for part in combo for d in part)
            assignments = decode_vector(digits)
            if assignments is not None:
                valid.append((digits, assignments))
        if valid:
            for idx in _sample_indices(rng, len(valid), min(k, len(valid))):
                accepted.append(valid[idx])
    else:
        flat = [s for unit_slots in unit_slot_lists for s in unit_slots]
        seen = set()
        budget = cfg.attempts_per_fill * k
        while len(accepted) < k and budget > 0:
            budget -= 1
            digits = tuple(_digit(rng, s.radix) for s in flat)
            if digits in seen:
                continue
            seen.add(digits)
            assignments = decode_vector(digits)
            if assignments is not None:
                accepted.append((digits, assignments))
        accepted.sort(key=lambda pair: pair[0])

    if not accepted:
        log.info("NoCompatibleColumns: %s cannot host pattern %s",
                 schema.db_id, " ".join(pattern))
        return []

    out: list[SqlAst] = []
    for _, assignments in accepted:
        units = [
            _build_unit(unit_skel, assignment, content, rng, cfg)
            for unit_skel, assignment in zip(skeleton.units, assignments)
        ]
        if any(u is None for u in units):
            continue
        if skeleton.set_op:
            ast = SqlAst(left=units[0], set_op=skeleton.set_op, right=units[1])
        else:
            ast = SqlAst(left=units[0])
        if extract_pattern(ast) != pattern:
            raise AssertionError(
                f"pattern drift: {extract_pattern(ast)} != {pattern}")
        out.append(ast)
    return out


def filter_executable(queries: Sequence[SqlAst], content: DatabaseContent,
                      require_nonempty: bool = False) -> list[SqlAst]:
    """Keep queries whose execution succeeds, preserving order."""
    kept = []
    for q in queries:
        try:
            result = execute(q, content)
        except EvalError as exc:
            log.debug("%s: dropped %s: %s", content.db_id,
                      type(exc).__name__, exc)
            continue
        if require_nonempty and not result.rows:
            log.debug("%s: dropped empty-result query", content.db_id)
            continue
        kept.append(q)
    return kept
