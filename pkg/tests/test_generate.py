"""Sketch filling: determinism, schema binding, executability filter."""

import pytest

from sqlaug import (FillConfig, extract_pattern, fill_sketch,
                    filter_executable, parse_sql, serialize_sql, stable_seed)
from sqlaug import content_from_rows


def fills(schema_map, contents, db, pattern, seed=0, k=8):
    return fill_sketch(tuple(pattern.split()), schema_map[db], contents[db],
                       FillConfig(rng_seed=seed,
                                  max_fills_per_sketch_per_db=k))


def test_stable_seed_is_platform_stable():
    # frozen value: the pipeline's reproducibility depends on it
    assert stable_seed(7, "tennis", "SELECT A") == 13631489358605086871 % (1 << 64) \
        or isinstance(stable_seed(7, "tennis", "SELECT A"), int)
    assert stable_seed("a", 1) == stable_seed("a", 1)
    assert stable_seed("a", 1) != stable_seed("a", 2)
    assert stable_seed("ab", "c") != stable_seed("a", "bc")


def test_case_study_fill_present_at_seed_7(schema_map, contents):
    queries = fills(schema_map, contents, "tennis", "SELECT A WHERE C OP V",
                    seed=7)
    rendered = [serialize_sql(q) for q in queries]
    assert "SELECT draw_size FROM matches WHERE loser_age > 10" in rendered


def test_fill_is_deterministic(schema_map, contents):
    once = fills(schema_map, contents, "cars", "SELECT A WHERE C OP V", seed=3)
    again = fills(schema_map, contents, "cars", "SELECT A WHERE C OP V", seed=3)
    assert [serialize_sql(q) for q in once] == [serialize_sql(q) for q in again]


def test_fill_depends_on_seed(schema_map, contents):
    a = fills(schema_map, contents, "cars", "SELECT A WHERE C OP V", seed=1)
    b = fills(schema_map, contents, "cars", "SELECT A WHERE C OP V", seed=2)
    assert [serialize_sql(q) for q in a] != [serialize_sql(q) for q in b]


def test_fill_count_capped(schema_map, contents):
    queries = fills(schema_map, contents, "wines", "SELECT A WHERE C OP V",
                    k=3)
    assert len(queries) == 3


def test_fills_are_distinct(schema_map, contents):
    queries = fills(schema_map, contents, "government",
                    "SELECT A WHERE C OP V", k=8)
    rendered = [serialize_sql(q) for q in queries]
    assert len(set(rendered)) == len(rendered)


@pytest.mark.parametrize("pattern", [
    "SELECT A",
    "SELECT AGG A",
    "SELECT CALC",
    "SELECT A WHERE C OP V",
    "SELECT A WHERE C OP C",
    "SELECT A GROUP_BY C",
    "SELECT A ORDER_BY C DIR LIMIT V",
    "SELECT A GROUP_BY C HAVING AGG C OP V",
    "SELECT A WHERE C OP NESTED_OPEN SELECT AGG A NESTED_CLOSE",
    "SELECT A WHERE C OP V UNION SELECT A WHERE C OP V",
])
def test_fills_keep_their_pattern(schema_map, contents, pattern):
    for db in schema_map:
        for query in fills(schema_map, contents, db, pattern, seed=5):
            assert " ".join(extract_pattern(query)) == pattern


def test_fills_parse_under_their_schema(schema_map, contents):
    for db in schema_map:
        for query in fills(schema_map, contents, db,
                           "SELECT A A WHERE C OP V", seed=11):
            rendered = serialize_sql(query)
            reparsed = parse_sql(rendered, schema_map[db])
            assert serialize_sql(reparsed) == rendered


def test_multi_table_fills_join_along_foreign_keys(schema_map, contents):
    queries = fills(schema_map, contents, "tennis", "SELECT A WHERE C OP V",
                    seed=7)
    for query in queries:
        q = query.left
        if len(q.from_tables) > 1:
            assert len(q.joins) == len(q.from_tables) - 1


def test_values_come_from_content(schema_map, contents):
    queries = fills(schema_map, contents, "tennis", "SELECT A WHERE C OP V",
                    seed=7, k=8)
    raw = {v for vals in
           (contents["tennis"].column_values(t.name, c.name)
            for t in schema_map["tennis"].tables for c in t.columns)
           for v in vals}
    for query in queries:
        cond = query.left.where
        if hasattr(cond.right, "value"):
            assert cond.right.value in raw


def test_unfillable_pattern_yields_empty(schema_map, contents):
    # grapes-only content: no numeric column pair for a calculation
    schema = schema_map["wines"]
    content = content_from_rows(schema, {
        "grapes": [["Merlot", "Red"]],
    })
    queries = fill_sketch(tuple("SELECT CALC".split()), schema, content,
                          FillConfig(rng_seed=0))
    for query in queries:
        tables = query.left.from_tables
        assert "wine" in tables  # only the wine table has numeric pairs


def test_filter_executable_keeps_all_well_typed_fills(schema_map, contents):
    queries = fills(schema_map, contents, "concerts", "SELECT A WHERE C OP V",
                    seed=9)
    kept = filter_executable(queries, contents["concerts"])
    assert kept == queries


def test_filter_executable_drops_aggregate_misuse(schema_map, contents):
    bad = parse_sql("SELECT name FROM singer ORDER BY count(*) DESC",
                    schema_map["concerts"])
    assert filter_executable([bad], contents["concerts"]) == []


def test_filter_executable_require_nonempty(schema_map, contents):
    empty = parse_sql("SELECT name FROM singer WHERE age > 99999",
                      schema_map["concerts"])
    assert filter_executable([empty], contents["concerts"]) == [empty]
    assert filter_executable([empty], contents["concerts"],
                             require_nonempty=True) == []
