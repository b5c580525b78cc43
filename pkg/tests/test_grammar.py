"""Grammar loading, sketch enumeration, and coverage-driven generation."""

from functools import lru_cache

import pytest

from sqlaug import (default_grammar, enumerate_sketches,
                    generate_until_coverage, level_schedule, resolve_grammar)
from sqlaug.ast import PATTERN_ALPHABET
from sqlaug.grammar import (CapExceeded, EmptyCorpus, Exhausted,
                            GrammarParseError, UndeclaredSymbol,
                            UnproductiveNonterminal, parse_grammar)


def count_trees(grammar, depth: int, breadth: int) -> int:
    """Independent derivation-tree counter used as the enumeration oracle.

    Counts trees whose depth is at most ``depth`` and whose widest node has
    at most ``breadth`` children, by direct recursion over the rules.
    """

    @lru_cache(maxsize=None)
    def count(symbol: str, budget: int) -> int:
        if symbol in PATTERN_ALPHABET:
            return 1
        if budget <= 0:
            return 0
        total = 0
        for rule in grammar.rules:
            if rule.lhs != symbol or len(rule.rhs) > breadth:
                continue
            ways = 1
            for child in rule.rhs:
                ways *= count(child, budget - 1)
                if ways == 0:
                    break
            total += ways
        return total

    return count(grammar.start, depth)


@pytest.mark.parametrize("level", [(3, 2), (3, 3), (4, 3), (4, 4), (5, 5)])
def test_enumeration_count_matches_independent_oracle(level):
    grammar = default_grammar()
    trees = enumerate_sketches(grammar, level)
    assert len(trees) == count_trees(grammar, *level)


def test_enumeration_is_cumulative_across_levels():
    grammar = default_grammar()
    smaller = {t.pattern() for t in enumerate_sketches(grammar, (3, 3))}
    larger = {t.pattern() for t in enumerate_sketches(grammar, (4, 3))}
    assert smaller < larger


def test_default_grammar_has_no_fit_at_minimum_level():
    with pytest.raises(Exhausted):
        enumerate_sketches(default_grammar(), (2, 2))


def test_enumeration_order_is_canonical():
    grammar = default_grammar()
    once = [t.sketch_id for t in enumerate_sketches(grammar, (4, 3))]
    again = [t.sketch_id for t in enumerate_sketches(grammar, (4, 3))]
    assert once == again
    assert len(set(once)) == len(once)


def test_tree_cap_enforced():
    with pytest.raises(CapExceeded):
        enumerate_sketches(default_grammar(), (5, 5), cap=100)


def test_level_schedule_alternates_depth_and_breadth():
    schedule = level_schedule((2, 2))
    first = [tuple(next(schedule)) for _ in range(6)]
    assert first == [(2, 2), (3, 2), (3, 3), (4, 3), (4, 4), (5, 4)]


def test_patterns_stay_within_the_closed_alphabet():
    for tree in enumerate_sketches(default_grammar(), (4, 3)):
        assert set(tree.pattern()) <= PATTERN_ALPHABET


def test_resolve_grammar_accepts_name_object_and_path(tmp_path):
    grammar = default_grammar()
    assert resolve_grammar(grammar) is grammar
    assert resolve_grammar("astg.default").start == grammar.start
    path = tmp_path / "tiny.g"
    path.write_text("S -> SELECT A\n")
    assert resolve_grammar(path).start == "S"


def test_parse_grammar_alternatives_and_comments():
    grammar = parse_grammar("""
        # toy grammar
        S -> SELECT A | SELECT A A
    """)
    assert len(grammar.rules) == 2
    assert grammar.start == "S"


@pytest.mark.parametrize("text,error", [
    ("", GrammarParseError),
    ("no arrow here", GrammarParseError),
    ("SELECT -> A", GrammarParseError),      # terminal as left-hand side
    ("S -> SELECT Undefined", UndeclaredSymbol),
    ("S -> S A", UnproductiveNonterminal),   # no terminating rule
])
def test_grammar_validation(text, error):
    with pytest.raises(error):
        parse_grammar(text)


# A three-step grammar: three patterns appear at level (2,2), three more
# at (3,2) via a deeper chain, three more at (3,3) via wider rules.
STEPPED = """
S -> SELECT A
S -> SELECT C
S -> SELECT V
S -> D2 A
S -> D2 C
S -> D2 V
S -> SELECT A A
S -> SELECT C C
S -> SELECT V V
D2 -> D1 C
D1 -> WHERE V
"""


def stepped_corpus():
    covered = [
        ("SELECT", "A"), ("SELECT", "C"), ("SELECT", "V"),
        ("WHERE", "V", "C", "A"), ("WHERE", "V", "C", "C"),
        ("WHERE", "V", "C", "V"),
        ("SELECT", "A", "A"), ("SELECT", "C", "C"), ("SELECT", "V", "V"),
    ]
    never = [("HAVING", "HAVING", "HAVING")]
    return covered + never


def test_coverage_run_stops_at_threshold():
    run = generate_until_coverage(parse_grammar(STEPPED), stepped_corpus(),
                                  threshold=0.8)
    assert [report.coverage for report in run.levels] == [0.3, 0.6, 0.9]
    assert run.reached
    assert tuple(run.final_level) == (3, 3)
    assert run.coverage == 0.9


def test_coverage_threshold_already_met_at_first_level():
    run = generate_until_coverage(parse_grammar(STEPPED),
                                  [("SELECT", "A")], threshold=0.8)
    assert run.reached
    assert tuple(run.final_level) == (2, 2)
    assert run.coverage == 1.0


def test_unreachable_threshold_reports_without_strict():
    run = generate_until_coverage(parse_grammar("S -> SELECT A"),
                                  [("SELECT", "A"), ("HAVING", "V")],
                                  threshold=0.9)
    assert not run.reached
    assert run.coverage == 0.5
    assert run.warning


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpus):
        generate_until_coverage(default_grammar(), [])


def test_coverage_counts_distinct_patterns_not_examples():
    # the same pattern three times counts once
    run = generate_until_coverage(parse_grammar(STEPPED),
                                  [("SELECT", "A")] * 3 + [("HAVING", "V")],
                                  threshold=0.5)
    assert run.coverage == 0.5
    assert tuple(run.final_level) == (2, 2)
