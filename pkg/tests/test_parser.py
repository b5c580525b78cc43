"""Parsing, identifier resolution, and canonical serialization."""

import pytest

from sqlaug import (SqlSyntaxError, UnknownIdentifierError, parse_sql,
                    serialize_sql)
from sqlaug.ast import Calc, ColumnRef, Condition, Literal, ValueRange


def roundtrip(sql: str, schema=None) -> str:
    return serialize_sql(parse_sql(sql, schema))


def test_case_study_query_shape():
    ast = parse_sql("SELECT draw_size FROM matches WHERE loser_age > 10")
    assert ast.set_op is None
    q = ast.left
    assert len(q.select) == 1
    assert q.select[0].agg is None
    assert q.select[0].expr == ColumnRef("draw_size")
    assert q.from_tables == ("matches",)
    cond = q.where
    assert isinstance(cond, Condition)
    assert cond.left == ColumnRef("loser_age")
    assert cond.op == ">"
    assert cond.right == Literal(10)


def test_case_study_query_is_serialization_fixed_point():
    sql = "SELECT draw_size FROM matches WHERE loser_age > 10"
    assert roundtrip(sql) == sql


@pytest.mark.parametrize("sql", [
    "SELECT name FROM head WHERE born_state != 'California'",
    "SELECT hand, count(*) FROM players GROUP BY hand",
    "SELECT grape FROM wine GROUP BY grape HAVING count(*) > 1",
    "SELECT name FROM wine ORDER BY price DESC LIMIT 1",
    "SELECT name, year FROM wine WHERE score > price",
    "SELECT weight - horsepower FROM cars_data WHERE year > 1972",
    "SELECT avg(price) FROM wine WHERE year BETWEEN 2008 AND 2012",
    "SELECT name FROM wine WHERE price > ( SELECT max(price) FROM wine )",
    "SELECT name FROM wine WHERE grape IN ( SELECT grape FROM grapes )",
    "SELECT location FROM stadium UNION SELECT country FROM singer",
    "SELECT first_name FROM players WHERE hand = 'L' OR country_code = 'USA'",
    "SELECT name FROM singer WHERE age > 20 AND country = 'France'",
    "SELECT last_name FROM players WHERE first_name LIKE 'S%'",
])
def test_roundtrip_fixed_points(sql):
    assert roundtrip(sql) == sql


def test_join_via_explicit_on_clause():
    sql = ("SELECT matches.draw_size FROM matches JOIN players "
           "ON matches.loser_id = players.player_id "
           "WHERE players.hand = 'L'")
    assert roundtrip(sql) == sql
    q = parse_sql(sql).left
    assert q.from_tables == ("matches", "players")
    assert len(q.joins) == 1


def test_whitespace_and_case_normalize():
    assert (roundtrip("select  Draw_Size\nfrom MATCHES where LOSER_AGE>10")
            == "SELECT Draw_Size FROM MATCHES WHERE LOSER_AGE > 10")


def test_distinct_survives_roundtrip():
    sql = "SELECT DISTINCT hand FROM players"
    assert roundtrip(sql) == sql


def test_between_builds_value_range():
    cond = parse_sql(
        "SELECT name FROM wine WHERE year BETWEEN 2008 AND 2012").left.where
    assert cond.op == "between"
    assert cond.right == ValueRange(Literal(2008), Literal(2012))


def test_calc_select_item():
    item = parse_sql("SELECT weight - horsepower FROM cars_data").left.select[0]
    assert isinstance(item.expr, Calc)
    assert item.expr.op == "-"


def test_negative_literal_comparison():
    cond = parse_sql(
        "SELECT id FROM cars_data WHERE edispl - weight = -2925").left.where
    assert cond.right == Literal(-2925)


def test_float_and_scientific_literals():
    assert parse_sql("SELECT id FROM t WHERE x > 1.5").left.where.right \
        == Literal(1.5)
    assert parse_sql("SELECT id FROM t WHERE x > 9.58e-05").left.where.right \
        == Literal(9.58e-05)
    assert parse_sql("SELECT id FROM t WHERE x > .5").left.where.right \
        == Literal(0.5)


def test_string_escape_roundtrip():
    sql = "SELECT name FROM head WHERE born_state = 'O''Brien'"
    assert roundtrip(sql) == sql
    assert parse_sql(sql).left.where.right == Literal("O'Brien")


@pytest.mark.parametrize("bad", [
    "",
    "SELEC name FROM head",
    "SELECT FROM head",
    "SELECT name head",
    "SELECT name FROM head WHERE",
    "SELECT name FROM head WHERE born_state !!",
    "SELECT name FROM head GROUP BY",
    "SELECT name FROM head ORDER price",
    "SELECT name FROM head LIMIT 2.5",
    "SELECT name FROM head LIMIT 1e2",
    "SELECT name FROM head WHERE a > 1 trailing",
    "SELECT name FROM wine WHERE price > (SELECT max(price) FROM wine",
])
def test_syntax_errors(bad):
    with pytest.raises(SqlSyntaxError):
        parse_sql(bad)


def test_schema_resolution_accepts_known_names(schema_map):
    ast = parse_sql("SELECT draw_size FROM matches WHERE loser_age > 10",
                    schema_map["tennis"])
    assert ast.left.from_tables == ("matches",)


def test_schema_resolution_rejects_unknown_table(schema_map):
    with pytest.raises(UnknownIdentifierError):
        parse_sql("SELECT draw_size FROM nonexistent", schema_map["tennis"])


def test_schema_resolution_rejects_unknown_column(schema_map):
    with pytest.raises(UnknownIdentifierError):
        parse_sql("SELECT bogus_col FROM matches", schema_map["tennis"])


def test_unschema_parse_accepts_any_identifier():
    ast = parse_sql("SELECT anything FROM anywhere")
    assert ast.left.from_tables == ("anywhere",)


def test_corpus_parses_clean(train_corpus, schema_map):
    for record in train_corpus:
        ast = parse_sql(record["query"], schema_map[record["db_id"]])
        assert ast.left.select
