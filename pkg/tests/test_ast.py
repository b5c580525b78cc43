"""Pattern erasure and the pattern <-> text helpers."""

import pytest

from sqlaug import extract_pattern, parse_sql, pattern_from_text, \
    pattern_to_text
from sqlaug.ast import PATTERN_ALPHABET


def pattern_of(sql: str) -> str:
    return pattern_to_text(extract_pattern(parse_sql(sql)))


def test_case_study_erasure():
    assert pattern_of("SELECT draw_size FROM matches WHERE loser_age > 10") \
        == "SELECT A WHERE C OP V"


@pytest.mark.parametrize("sql,expected", [
    # FROM never contributes tokens
    ("SELECT name FROM head", "SELECT A"),
    ("SELECT matches.match_id FROM matches JOIN players "
     "ON matches.loser_id = players.player_id", "SELECT A"),
    # DISTINCT is erased
    ("SELECT DISTINCT hand FROM players", "SELECT A"),
    # aggregates and stars
    ("SELECT count(*) FROM players", "SELECT AGG A"),
    ("SELECT avg(price) FROM wine WHERE year > 2010",
     "SELECT AGG A WHERE C OP V"),
    # arithmetic select item is one CALC token
    ("SELECT weight - horsepower FROM cars_data", "SELECT CALC"),
    ("SELECT max(weight / horsepower) FROM cars_data", "SELECT AGG CALC"),
    # BETWEEN contributes a single V
    ("SELECT name FROM wine WHERE year BETWEEN 2008 AND 2012",
     "SELECT A WHERE C OP V"),
    # LIMIT count is a V
    ("SELECT name FROM wine ORDER BY price DESC LIMIT 1",
     "SELECT A ORDER_BY C DIR LIMIT V"),
    ("SELECT name FROM wine ORDER BY price ASC",
     "SELECT A ORDER_BY C DIR"),
    ("SELECT name FROM wine ORDER BY max(price) DESC",
     "SELECT A ORDER_BY AGG C DIR"),
    # group and having
    ("SELECT hand, count(*) FROM players GROUP BY hand",
     "SELECT A AGG A GROUP_BY C"),
    ("SELECT grape FROM wine GROUP BY grape HAVING count(*) > 1",
     "SELECT A GROUP_BY C HAVING AGG C OP V"),
    # boolean connectives
    ("SELECT name FROM singer WHERE age > 20 AND country = 'France'",
     "SELECT A WHERE C OP V AND C OP V"),
    ("SELECT name FROM singer WHERE age > 20 OR country = 'France'",
     "SELECT A WHERE C OP V OR C OP V"),
    # column-to-column comparison
    ("SELECT name FROM wine WHERE score > price",
     "SELECT A WHERE C OP C"),
    # nesting markers
    ("SELECT name FROM wine WHERE price > (SELECT max(price) FROM wine)",
     "SELECT A WHERE C OP NESTED_OPEN SELECT AGG A NESTED_CLOSE"),
    ("SELECT name FROM wine WHERE grape IN (SELECT grape FROM grapes)",
     "SELECT A WHERE C OP NESTED_OPEN SELECT A NESTED_CLOSE"),
    # set operations
    ("SELECT location FROM stadium UNION SELECT country FROM singer",
     "SELECT A UNION SELECT A"),
    ("SELECT name FROM stadium WHERE capacity > 1000 INTERSECT "
     "SELECT name FROM stadium WHERE capacity < 9000",
     "SELECT A WHERE C OP V INTERSECT SELECT A WHERE C OP V"),
    ("SELECT singer_id FROM singer EXCEPT "
     "SELECT singer_id FROM singer_in_concert",
     "SELECT A EXCEPT SELECT A"),
])
def test_erasure_table(sql, expected):
    assert pattern_of(sql) == expected


def test_patterns_use_only_the_closed_alphabet(train_corpus):
    for record in train_corpus:
        for token in extract_pattern(parse_sql(record["query"])):
            assert token in PATTERN_ALPHABET, token


def test_pattern_text_roundtrip():
    pattern = ("SELECT", "A", "WHERE", "C", "OP", "V")
    assert pattern_from_text(pattern_to_text(pattern)) == pattern


def test_pattern_from_text_rejects_unknown_token():
    with pytest.raises(ValueError):
        pattern_from_text("SELECT A FROM B")
