"""Shared fixtures: the five-database fixture set and one pipeline run."""

import time
from pathlib import Path

import pytest

from sqlaug import (AugmentConfig, TemplateTranslator, augment, load_content,
                    load_schemas, read_records)

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def schemas():
    return load_schemas(DATA / "tables.json")


@pytest.fixture(scope="session")
def schema_map(schemas):
    return {s.db_id: s for s in schemas}


@pytest.fixture(scope="session")
def contents(schemas):
    return {s.db_id: load_content(DATA / "content" / f"{s.db_id}.json", s)
            for s in schemas}


@pytest.fixture(scope="session")
def train_corpus():
    return read_records(DATA / "train.jsonl")


@pytest.fixture(scope="session")
def augment_run(schemas, contents, train_corpus):
    """One full single-threaded pipeline run, shared by every test that
    only inspects its output."""
    start = time.perf_counter()
    examples, stats = augment(schemas, contents, "astg.default",
                              train_corpus, TemplateTranslator(),
                              AugmentConfig(seed=1, workers=1))
    elapsed = time.perf_counter() - start
    return examples, stats, elapsed
