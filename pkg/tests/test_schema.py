"""Schema and row loading, natural names, foreign-key join paths."""

import json

import pytest

from sqlaug import content_from_rows, join_path, load_content, load_schema, \
    load_schemas
from sqlaug.schema import (ArityMismatchError, ContentTypeError,
                           DanglingForeignKeyError, Disconnected,
                           DuplicateNameError, SchemaFormatError)

from conftest import DATA


def test_fixture_schemas_load(schemas):
    assert [s.db_id for s in schemas] == [
        "tennis", "cars", "wines", "government", "concerts"]


def test_case_study_schema_columns(schema_map):
    matches = schema_map["tennis"].find_table("matches")
    names = [c.name for c in matches.columns]
    assert "draw_size" in names and "loser_age" in names
    assert all(c.ctype == "number" for c in matches.columns)


def test_natural_names_strip_underscores(schema_map):
    tennis = schema_map["tennis"]
    assert tennis.natural("matches", "draw_size") == "draw size"
    assert tennis.natural("matches") == "matches"


def test_natural_names_from_display_field(schema_map):
    concerts = schema_map["concerts"]
    assert concerts.natural("singer_in_concert") == "singer in concert"


def test_primary_and_foreign_keys(schema_map):
    tennis = schema_map["tennis"]
    players = tennis.find_table("players")
    assert tennis.is_primary(players.find_column("player_id"))
    fk = tennis.foreign_keys[0]
    assert (fk.table, fk.column) == ("matches", "loser_id")
    assert (fk.ref_table, fk.ref_column) == ("players", "player_id")


def test_load_schema_picks_one_database():
    schema = load_schema(DATA / "tables.json", "wines")
    assert schema.db_id == "wines"
    with pytest.raises(SchemaFormatError):
        load_schema(DATA / "tables.json", "no_such_db")


def test_duplicate_table_name_rejected(tmp_path):
    entry = {
        "db_id": "dup",
        "table_names_original": ["t", "T"],
        "table_names": ["t", "t"],
        "column_names_original": [[-1, "*"], [0, "a"], [1, "b"]],
        "column_names": [[-1, "*"], [0, "a"], [1, "b"]],
        "column_types": ["text", "number", "number"],
        "primary_keys": [],
        "foreign_keys": [],
    }
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([entry]))
    with pytest.raises(DuplicateNameError):
        load_schemas(path)


def test_dangling_foreign_key_rejected(tmp_path):
    entry = {
        "db_id": "dangling",
        "table_names_original": ["t"],
        "table_names": ["t"],
        "column_names_original": [[-1, "*"], [0, "a"]],
        "column_names": [[-1, "*"], [0, "a"]],
        "column_types": ["text", "number"],
        "primary_keys": [],
        "foreign_keys": [[1, 9]],
    }
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([entry]))
    with pytest.raises(DanglingForeignKeyError):
        load_schemas(path)


def test_json_and_csv_content_agree(schema_map):
    tennis = schema_map["tennis"]
    from_json = load_content(DATA / "content" / "tennis.json", tennis)
    from_csv = load_content(DATA / "content_csv" / "tennis", tennis)
    assert from_json.rows == from_csv.rows


def test_content_types_coerced(contents):
    gov = contents["government"]
    row = gov.table_rows("management")[0]
    assert row[-1] in (0, 1)  # boolean cells load as 0/1
    assert isinstance(gov.table_rows("head")[0][-1], int)  # age is a number
    assert isinstance(gov.table_rows("department")[0][-1], str)  # created: time


def test_column_values_distinct_sorted(contents):
    values = contents["tennis"].column_values("matches", "loser_age")
    assert values == (10, 16, 19, 22)


def test_missing_table_in_content_loads_empty(schema_map, tmp_path):
    path = tmp_path / "partial.json"
    path.write_text(json.dumps({"players": [[1, "A", "B", "R", "USA"]]}))
    content = load_content(path, schema_map["tennis"])
    assert len(content.table_rows("players")) == 1
    assert content.table_rows("matches") == ()


def test_unknown_table_in_content_rejected(schema_map, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"umpires": [[1]]}))
    with pytest.raises(SchemaFormatError):
        load_content(path, schema_map["tennis"])


def test_row_arity_checked(schema_map):
    with pytest.raises(ArityMismatchError):
        content_from_rows(schema_map["tennis"], {"players": [[1, "only"]]})


def test_cell_type_checked(schema_map):
    with pytest.raises(ContentTypeError):
        content_from_rows(schema_map["tennis"], {
            "matches": [[1, "not-a-number", 1, 1, 1, 1, 1]]})


def test_join_path_direct_edge(schema_map):
    edges = join_path(schema_map["tennis"], ["matches", "players"])
    assert len(edges) == 1
    edge = edges[0]
    assert {edge.left_table, edge.right_table} == {"matches", "players"}


def test_join_path_through_intermediate(schema_map):
    edges = join_path(schema_map["concerts"], ["stadium", "singer"])
    tables = {t for e in edges for t in (e.left_table, e.right_table)}
    assert {"stadium", "singer"} <= {t.lower() for t in tables}
    # tree over the smallest connected superset: m nodes need m-1 edges
    assert len(edges) == len(tables) - 1


def test_join_path_single_table_is_empty(schema_map):
    assert join_path(schema_map["tennis"], ["matches"]) == []


def test_join_path_disconnected(schema_map):
    with pytest.raises(Disconnected):
        join_path(schema_map["tennis"], ["players", "nonexistent"])
