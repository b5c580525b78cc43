"""Mining clause/subquestion pairs from labeled question-SQL data.

Question n-grams (n ≤ 6) are matched against the database elements a query
mentions — column and table natural names and literal values — under a
forgiving normalization (case, punctuation, underscores, a naive trailing-s
stem, canonical number formatting).  Each clause whose elements are all
linked gets as its subquestion the shortest contiguous question span
covering one link per element; spans strictly containing another clause's
span are filtered out as low-confidence.  Surviving pairs, grouped by
slot-normalized clause shape, form the translation training corpus.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from .ast import SqlAst
from .clauses import Clause, Element, decompose
from .schema import Schema

log = logging.getLogger(__name__)

MAX_NGRAM = 6

_WORD_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_NUM_RE = re.compile(r"^\d+(\.\d+)?$")


def tokenize_question(text: str) -> list[str]:
    """Split a question into word and punctuation tokens."""
    return _WORD_RE.findall(text)


def normalize_word(word: str) -> str:
    """Lowercase, drop punctuation, underscores to spaces, fold numbers."""
    word = word.lower().replace("_", " ").strip()
    word = "".join(ch for ch in word if ch.isalnum() or ch == " ")
    if _NUM_RE.match(word):
        number = float(word)
        if number == int(number):
            return str(int(number))
    return word


def _stem(word: str) -> str:
    return word[:-1] if len(word) > 3 and word.endswith("s") else word


def _phrase_forms(words: Iterable[str]) -> tuple[str, str]:
    """(exact, stemmed) normalized forms of a word sequence."""
    normed = [normalize_word(w) for w in words]
    flat = " ".join(w for w in normed if w).split()
    return " ".join(flat), " ".join(_stem(w) for w in flat)


@dataclass(frozen=True)
class Link:
    """One matched question span: tokens [start, end) name ``element``."""

    start: int
    end: int
    element: Element


@dataclass(frozen=True)
class TokenAlignment:
    question_tokens: tuple[str, ...]
    links: tuple[Link, ...]

    def spans_for(self, element_key: str) -> list[tuple[int, int]]:
        return [(l.start, l.end) for l in self.links
                if l.element.key == element_key]


@dataclass
class ClausePair:
    """A clause matched to a contiguous question segment."""

    clause: Clause
    subquestion: str
    span: tuple[int, int]
    confidence: str = "low"
    variant: Optional[int] = None
    question_id: int = -1
    clause_index: int = 0
    count: int = 1


def query_elements(ast: SqlAst, schema: Optional[Schema] = None
                   ) -> list[Element]:
    """Distinct DB elements the query mentions, in clause order."""
    seen = set()
    out = []
    for clause in decompose(ast, schema):
        for element in clause.elements:
            if element.key not in seen:
                seen.add(element.key)
                out.append(element)
    return out


def link_schema(question_tokens: Sequence[str], ast: SqlAst,
                schema: Optional[Schema] = None) -> TokenAlignment:
    """Match question n-grams (n ≤ 6) to the query's DB elements.

    All spans whose normalized text equals an element's natural name or
    value string are candidate links; overlapping candidates resolve
    longest-match-first (ties leftmost-first).
    """
    tokens = tuple(question_tokens)
    targets = []
    for element in query_elements(ast, schema):
        exact, stemmed = _phrase_forms(element.text.split())
        if exact:
            targets.append((element, exact, stemmed))

    candidates: list[Link] = []
    for n in range(1, MAX_NGRAM + 1):
        for i in range(0, len(tokens) - n + 1):
            # edge tokens must carry content, or pure-punctuation neighbors
            # would pad the span and beat the tight match in the greedy
            if not normalize_word(tokens[i]) or not normalize_word(tokens[i + n - 1]):
                continue
            exact, stemmed = _phrase_forms(tokens[i:i + n])
            if not exact:
                continue
            for element, t_exact, t_stemmed in targets:
                if exact == t_exact or stemmed == t_stemmed:
                    candidates.append(Link(i, i + n, element))

    # longest match wins on overlap; ties resolve to the earlier, then to
    # the element listed first
    order = {t[0].key: rank for rank, t in enumerate(targets)}
    candidates.sort(key=lambda l: (-(l.end - l.start), l.start,
                                   order[l.element.key]))
    taken: list[Link] = []
    for link in candidates:
        if all(link.end <= kept.start or kept.end <= link.start
               for kept in taken):
            taken.append(link)
    taken.sort(key=lambda l: (l.start, l.end))
    return TokenAlignment(question_tokens=tokens, links=tuple(taken))


def _minimal_span(element_spans: list[list[tuple[int, int]]],
                  n_tokens: int) -> Optional[tuple[int, int]]:
    """Shortest window covering one span per element; leftmost on ties."""
    if any(not spans for spans in element_spans):
        return None
    best: Optional[tuple[int, int]] = None
    for left in range(n_tokens):
        # smallest right end such that every element has a span inside
        right_needed = 0
        feasible = True
        for spans in element_spans:
            ends = [e for s, e in spans if s >= left]
            if not ends:
                feasible = False
                break
            right_needed = max(right_needed, min(ends))
        if not feasible:
            break
        window = (left, right_needed)
        if best is None or (window[1] - window[0]) < (best[1] - best[0]):
            best = window
    return best


def extract_pairs(question_tokens: Sequence[str], ast: SqlAst,
                  alignment: TokenAlignment,
                  schema: Optional[Schema] = None) -> list[ClausePair]:
    """One pair per fully-linked clause: the minimal covering span.

    Clauses with an unlinked element yield nothing (counted by callers via
    the length difference against decompose)."""
    tokens = list(question_tokens)
    pairs = []
    for index, clause in enumerate(decompose(ast, schema)):
        if not clause.elements:
            continue  # SET_OP glue has no alignable content
        element_spans = [alignment.spans_for(e.key) for e in clause.elements]
        window = _minimal_span(element_spans, len(tokens))
        if window is None:
            log.debug("UnalignedClause: %s", clause.kind)
            continue
        start, end = window
        pairs.append(ClausePair(
            clause=clause,
            subquestion=" ".join(tokens[start:end]),
            span=(start, end),
            clause_index=index,
        ))
    return pairs


def filter_pairs(pairs: Sequence[ClausePair]) -> list[ClausePair]:
    """Containment filter within one question's pairs.

    A span strictly containing another clause's span is dropped (the
    shorter reading wins); identical spans from different clauses are
    ambiguous and both dropped.  Survivors are marked high confidence.
    """
    kept = []
    for pair in pairs:
        s, e = pair.span
        doomed = False
        for other in pairs:
            if other is pair:
                continue
            os, oe = other.span
            contains_strictly = (s <= os and oe <= e
                                 and (oe - os) < (e - s))
            identical = (s, e) == (os, oe)
            if contains_strictly:
                doomed = True
                break
            if identical:
                log.debug("ambiguous identical spans: %s vs %s",
                          pair.clause.kind, other.clause.kind)
                doomed = True
                break
        if not doomed:
            kept.append(replace(pair, confidence="high"))
    return kept


@dataclass
class VariantEntry:
    text: str
    variant: int
    count: int = 1


def collect_variants(pairs: Sequence[ClausePair]
                     ) -> dict[str, list[VariantEntry]]:
    """Group pairs by slot-normalized clause shape; distinct subquestion
    texts get variant indices in first-seen order.  Also stamps each
    pair's ``variant``."""
    table: dict[str, list[VariantEntry]] = {}
    for pair in pairs:
        key = pair.clause.key()
        entries = table.setdefault(key, [])
        for entry in entries:
            if entry.text == pair.subquestion:
                entry.count += 1
                pair.variant = entry.variant
                break
        else:
            entry = VariantEntry(text=pair.subquestion, variant=len(entries))
            entries.append(entry)
            pair.variant = entry.variant
    return table


def export_corpus(pairs: Sequence[ClausePair], path: Union[str, Path],
                  variants: Optional[dict] = None) -> int:
    """Write the mined corpus as JSONL, ordered by (question id, clause
    index).  Returns the number of records written."""
    if variants is None:
        collect_variants(pairs)
    ordered = sorted(pairs, key=lambda p: (p.question_id, p.clause_index))
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for pair in ordered:
            record = {
                "clause_tokens": [t.text for t in pair.clause.tokens],
                "token_types": [t.ttype for t in pair.clause.tokens],
                "variant": pair.variant if pair.variant is not None else 0,
                "subquestion": pair.subquestion,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(ordered)


@dataclass
class MiningReport:
    """Corpus-level alignment outcome."""

    pairs: list[ClausePair] = field(default_factory=list)
    total_clauses: int = 0
    aligned_clauses: int = 0
    examples: int = 0
    skipped: int = 0

    @property
    def alignment_rate(self) -> float:
        if self.total_clauses == 0:
            return 0.0
        return self.aligned_clauses / self.total_clauses


def mine_corpus(examples: Sequence[dict], schemas: dict[str, Schema],
                parse) -> MiningReport:
    """Run link → extract → filter over labeled {question, query, db_id}
    records.  ``parse`` is the SQL parser hook (text, schema) -> ast."""
    report = MiningReport()
    for qid, example in enumerate(examples):
        schema = schemas.get(example["db_id"])
        try:
            ast = parse(example["query"], schema)
        except Exception as exc:
            log.warning("skipping example %d (%s): %s", qid,
                        example["db_id"], exc)
            report.skipped += 1
            continue
        tokens = tokenize_question(example["question"])
        clauses = decompose(ast, schema)
        alignable = [c for c in clauses if c.elements]
        alignment = link_schema(tokens, ast, schema)
        pairs = filter_pairs(extract_pairs(tokens, ast, alignment, schema))
        for pair in pairs:
            pair.question_id = qid
        report.examples += 1
        report.total_clauses += len(alignable)
        report.aligned_clauses += len(pairs)
        report.pairs.extend(pairs)
    collect_variants(report.pairs)
    return report
