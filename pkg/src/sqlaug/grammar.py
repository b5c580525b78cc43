"""Sketch grammar: loading, enumeration, and pattern coverage.

A grammar derives SQL *sketches*: derivation trees whose leaves are pattern
tokens (keywords plus database slots such as A, C, V).  Sketches are
enumerated level by level, a level being a cap on tree depth and breadth,
until the enumerated patterns cover enough of a reference corpus.

Tree depth counts internal (nonterminal) nodes along the deepest path, so
the chain SQLs -> SQL -> Select -> "SELECT A" has depth 3.  Breadth is the
maximum child count over all nodes.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence, Union

from .ast import PATTERN_ALPHABET, Pattern

log = logging.getLogger(__name__)

DEFAULT_TREE_CAP = 10 ** 6


class GrammarParseError(ValueError):
    """Malformed grammar text."""


class UndeclaredSymbol(ValueError):
    """A rule references a symbol that is neither a terminal nor has rules."""

    def __init__(self, symbol: str, where: str = ""):
        self.symbol = symbol
        super().__init__(f"undeclared symbol {symbol!r}" + (f" ({where})" if where else ""))


class UnproductiveNonterminal(ValueError):
    """A nonterminal that never derives a terminal-only string."""

    def __init__(self, symbol: str):
        self.symbol = symbol
        super().__init__(f"nonterminal {symbol!r} has no terminal derivation")


class Exhausted(LookupError):
    """The grammar admits no sketch within the requested level."""


class CapExceeded(RuntimeError):
    """Enumeration would produce more trees than the configured hard cap."""


class EmptyCorpus(ValueError):
    """Coverage is undefined for an empty pattern corpus."""


class CapExceededBeforeThreshold(RuntimeError):
    """Level iteration ended before reaching the coverage threshold.

    Carries the partial result on the ``run`` attribute.
    """

    def __init__(self, run: "CoverageRun"):
        self.run = run
        super().__init__(
            f"stopped at level {tuple(run.final_level)} with coverage "
            f"{run.coverage:.3f}: {run.warning}")


class ComplexityLevel(NamedTuple):
    depth: int
    breadth: int


LevelLike = Union[ComplexityLevel, tuple[int, int]]


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[str, ...]
    index: int  # position in file order, globally unique

    def __str__(self) -> str:
        return f"{self.lhs} -> {' '.join(self.rhs)}"


@dataclass(frozen=True, eq=False)
class Grammar:
    start: str
    rules: tuple[Rule, ...]
    nonterminals: frozenset[str]
    terminals: frozenset[str]
    # None when the rule graph is cyclic (unbounded tree depth).
    depth_bound: Optional[int]
    breadth_bound: int
    source: str = "<grammar>"
    _by_lhs: dict = field(default_factory=dict, repr=False, compare=False)

    def rules_for(self, symbol: str) -> tuple[Rule, ...]:
        return self._by_lhs.get(symbol, ())

    def is_terminal(self, symbol: str) -> bool:
        return symbol in self.terminals


@dataclass(frozen=True)
class SketchTree:
    """One derivation: nonterminal nodes carry the applied rule index."""

    symbol: str
    rule_index: Optional[int] = None  # None for terminal leaves
    children: tuple["SketchTree", ...] = ()

    @property
    def is_terminal(self) -> bool:
        return self.rule_index is None

    @property
    def depth(self) -> int:
        if self.is_terminal:
            return 0
        return 1 + max((c.depth for c in self.children), default=0)

    @property
    def breadth(self) -> int:
        own = len(self.children)
        return max([own] + [c.breadth for c in self.children])

    def pattern(self) -> Pattern:
        out: list[str] = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_terminal:
                out.append(node.symbol)
            else:
                stack.extend(reversed(node.children))
        return tuple(out)

    def rule_signature(self) -> tuple[int, ...]:
        """Applied rule indices in preorder; the canonical sort key."""
        out: list[int] = []
        stack = [self]
        while stack:
            node = stack.pop()
            if not node.is_terminal:
                out.append(node.rule_index)
                stack.extend(reversed(node.children))
        return tuple(out)

    @property
    def sketch_id(self) -> str:
        return ".".join(str(i) for i in self.rule_signature())


def flatten(tree: SketchTree) -> Pattern:
    return tree.pattern()


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def parse_grammar(text: str, source: str = "<string>") -> Grammar:
    rules: list[Rule] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise GrammarParseError(f"{source}:{lineno}: expected 'LHS -> RHS ...'")
        lhs_text, rhs_text = line.split("->", 1)
        lhs = lhs_text.strip()
        if not lhs or " " in lhs:
            raise GrammarParseError(f"{source}:{lineno}: bad left-hand side {lhs!r}")
        if lhs in PATTERN_ALPHABET:
            raise GrammarParseError(
                f"{source}:{lineno}: terminal {lhs!r} cannot head a rule")
        # `|` separates alternatives sharing one left-hand side
        for alt in rhs_text.split("|"):
            rhs = tuple(alt.split())
            if not rhs:
                raise GrammarParseError(f"{source}:{lineno}: empty right-hand side")
            rules.append(Rule(lhs=lhs, rhs=rhs, index=len(rules)))
    if not rules:
        raise GrammarParseError(f"{source}: no rules")
    return _validate(rules, source)


def load_grammar(path: Union[str, Path]) -> Grammar:
    path = Path(path)
    return parse_grammar(path.read_text(encoding="utf-8"), source=str(path))


def default_grammar() -> Grammar:
    text = resources.files("sqlaug").joinpath("data/astg.default").read_text("utf-8")
    return parse_grammar(text, source="astg.default")


def resolve_grammar(spec: Union["Grammar", str, Path]) -> "Grammar":
    """Accept a Grammar, the built-in name ``astg.default``, or a file path."""
    if isinstance(spec, Grammar):
        return spec
    if str(spec) == "astg.default":
        return default_grammar()
    return load_grammar(spec)


def _validate(rules: list[Rule], source: str) -> Grammar:
    by_lhs: dict[str, list[Rule]] = {}
    for r in rules:
        by_lhs.setdefault(r.lhs, []).append(r)
    nonterminals = frozenset(by_lhs)
    used_terminals = set()

    for r in rules:
        for sym in r.rhs:
            if sym in PATTERN_ALPHABET:
                used_terminals.add(sym)
            elif sym not in nonterminals:
                raise UndeclaredSymbol(sym, where=f"{source}, rule '{r}'")

    # Productivity: grow the set of nonterminals known to terminate.
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for r in rules:
            if r.lhs in productive:
                continue
            if all(s in PATTERN_ALPHABET or s in productive for s in r.rhs):
                productive.add(r.lhs)
                changed = True
    for nt in sorted(nonterminals - productive):
        raise UnproductiveNonterminal(nt)

    start = rules[0].lhs
    reachable = {start}
    frontier = [start]
    while frontier:
        sym = frontier.pop()
        for r in by_lhs.get(sym, ()):
            for s in r.rhs:
                if s in nonterminals and s not in reachable:
                    reachable.add(s)
                    frontier.append(s)
    unreachable = nonterminals - reachable
    if unreachable:
        log.warning("%s: unreachable nonterminals: %s", source, sorted(unreachable))

    depth_bound = _depth_bound(by_lhs, start)
    breadth_bound = max(len(r.rhs) for r in rules)
    grammar = Grammar(
        start=start,
        rules=tuple(rules),
        nonterminals=nonterminals,
        terminals=frozenset(used_terminals),
        depth_bound=depth_bound,
        breadth_bound=breadth_bound,
        source=source,
    )
    grammar._by_lhs.update({k: tuple(v) for k, v in by_lhs.items()})
    return grammar


def _depth_bound(by_lhs: dict[str, list[Rule]], start: str) -> Optional[int]:
    """Longest nonterminal chain from start, or None if the graph is cyclic."""
    DOING, DONE = 0, 1
    state: dict[str, int] = {}
    bound: dict[str, int] = {}

    def walk(sym: str) -> Optional[int]:
        if sym in PATTERN_ALPHABET:
            return 0
        if state.get(sym) == DOING:
            return None  # cycle: depth unbounded
        if state.get(sym) == DONE:
            return bound[sym]
        state[sym] = DOING
        best = 0
        for r in by_lhs.get(sym, ()):
            for child in r.rhs:
                d = walk(child)
                if d is None:
                    return None
                best = max(best, d)
        state[sym] = DONE
        bound[sym] = 1 + best
        return bound[sym]

    return walk(start)


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------


def enumerate_sketches(grammar: Grammar, level: LevelLike,
                       cap: int = DEFAULT_TREE_CAP) -> list[SketchTree]:
    """All derivation trees with depth <= level.depth and breadth <=
    level.breadth, in canonical preorder rule-index order.

    Raises:
        Exhausted: no tree fits within the level.
        CapExceeded: enumeration would build more than ``cap`` trees.
    """
    depth, breadth = level
    memo: dict[tuple[str, int], list[SketchTree]] = {}
    built = itertools.count()

    def expand(symbol: str, budget: int) -> list[SketchTree]:
        if symbol in PATTERN_ALPHABET:
            return [SketchTree(symbol=symbol)]
        if budget <= 0:
            return []
        key = (symbol, budget)
        if key in memo:
            return memo[key]
        trees: list[SketchTree] = []
        for rule in grammar.rules_for(symbol):
            if len(rule.rhs) > breadth:
                continue
            child_lists = [expand(s, budget - 1) for s in rule.rhs]
            if any(not lst for lst in child_lists):
                continue
            # product varies the rightmost child fastest, keeping the
            # preorder rule-index order lexicographic
            for combo in itertools.product(*child_lists):
                if next(built) >= cap:
                    raise CapExceeded(
                        f"more than {cap} trees at level ({depth}, {breadth})")
                trees.append(SketchTree(symbol=symbol, rule_index=rule.index,
                                        children=combo))
        memo[key] = trees
        return trees

    result = expand(grammar.start, depth)
    if not result:
        raise Exhausted(f"{grammar.source} admits no sketch within "
                        f"depth {depth}, breadth {breadth}")
    return list(result)


def derivable(grammar: Grammar, pattern: Sequence[str]) -> bool:
    """True when the grammar derives the token sequence (recognizer used to
    cross-check enumeration soundness)."""
    tokens = tuple(pattern)
    n = len(tokens)
    memo: dict = {}
    IN_PROGRESS = object()

    def can(sym: str, i: int, j: int) -> bool:
        if sym in PATTERN_ALPHABET:
            return j == i + 1 and tokens[i] == sym
        key = (sym, i, j)
        hit = memo.get(key)
        if hit is IN_PROGRESS:
            return False  # re-entrant unary cycle cannot shorten a derivation
        if hit is not None:
            return hit
        memo[key] = IN_PROGRESS
        ok = any(can_seq(r.rhs, i, j) for r in grammar.rules_for(sym))
        memo[key] = ok
        return ok

    def can_seq(rhs: tuple[str, ...], i: int, j: int) -> bool:
        if not rhs:
            return i == j
        if len(rhs) == 1:
            return can(rhs[0], i, j)
        key = (rhs, i, j)
        hit = memo.get(key)
        if hit is IN_PROGRESS:
            return False
        if hit is not None:
            return hit
        memo[key] = IN_PROGRESS
        ok = any(can(rhs[0], i, k) and can_seq(rhs[1:], k, j)
                 for k in range(i + 1, j + 1))
        memo[key] = ok
        return ok

    return n > 0 and can(grammar.start, 0, n)


# ---------------------------------------------------------------------------
# Coverage
# ---------------------------------------------------------------------------


def coverage(generated, corpus) -> float:
    """Fraction of distinct corpus patterns present among generated patterns."""
    distinct = {tuple(p) for p in corpus}
    if not distinct:
        raise EmptyCorpus("coverage needs at least one corpus pattern")
    got = {tuple(p) for p in generated}
    return len(distinct & got) / len(distinct)


def level_schedule(start: LevelLike = (2, 2)) -> Iterator[ComplexityLevel]:
    """Levels from simple to complex: grow depth when it does not exceed
    breadth, otherwise catch breadth up.  (2,2), (3,2), (3,3), (4,3), ..."""
    depth, breadth = start
    while True:
        yield ComplexityLevel(depth, breadth)
        if depth <= breadth:
            depth += 1
        else:
            breadth += 1


@dataclass
class LevelReport:
    level: ComplexityLevel
    new_patterns: int
    coverage: float


@dataclass
class CoverageRun:
    sketches: list[SketchTree]
    coverage: float
    final_level: ComplexityLevel
    reached: bool
    warning: Optional[str] = None
    levels: list[LevelReport] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (sketches, coverage, final_level)
        return iter((self.sketches, self.coverage, self.final_level))


def generate_until_coverage(grammar: Grammar, corpus_patterns,
                            threshold: float = 0.8,
                            start_level: LevelLike = (2, 2),
                            cap: int = DEFAULT_TREE_CAP,
                            max_level: Optional[LevelLike] = None,
                            strict: bool = False) -> CoverageRun:
    """Enumerate levels in schedule order, accumulating pattern-distinct
    sketches, until coverage of the corpus reaches the threshold.

    Sketches seen at earlier levels keep their first position; within a
    level the canonical enumeration order is kept, so output is fully
    deterministic.

    When the threshold is unreachable (grammar exhausted, tree cap hit, or
    max_level passed) the run is returned with ``reached=False`` and a
    warning, or raised as CapExceededBeforeThreshold when ``strict``.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    distinct_corpus = {tuple(p) for p in corpus_patterns}
    if not distinct_corpus:
        raise EmptyCorpus("generate_until_coverage needs corpus patterns")

    seen: set[Pattern] = set()
    kept: list[SketchTree] = []
    reports: list[LevelReport] = []
    covered = 0
    warning = None
    reached = False
    level = ComplexityLevel(*start_level)

    for level in level_schedule(start_level):
        if max_level is not None and tuple(level) > tuple(max_level):
            warning = (f"level cap {tuple(max_level)} passed at coverage "
                       f"{covered / len(distinct_corpus):.3f}")
            break
        try:
            trees = enumerate_sketches(grammar, level, cap=cap)
        except Exhausted:
            trees = []
        except CapExceeded as exc:
            warning = f"tree cap hit: {exc}"
            break
        fresh = 0
        for tree in trees:
            pat = tree.pattern()
            if pat in seen:
                continue
            seen.add(pat)
            kept.append(tree)
            fresh += 1
            if pat in distinct_corpus:
                covered += 1
        cov = covered / len(distinct_corpus)
        reports.append(LevelReport(level=level, new_patterns=fresh, coverage=cov))
        log.info("level %s: %d new patterns, coverage %.3f", tuple(level), fresh, cov)
        if cov >= threshold:
            reached = True
            break
        complete = (grammar.depth_bound is not None
                    and level.depth >= grammar.depth_bound
                    and level.breadth >= grammar.breadth_bound)
        if complete:
            warning = (f"grammar exhausted at level {tuple(level)} with "
                       f"coverage {cov:.3f} below threshold {threshold}")
            break

    run = CoverageRun(
        sketches=kept,
        coverage=covered / len(distinct_corpus),
        final_level=level,
        reached=reached,
        warning=warning,
        levels=reports,
    )
    if warning:
        log.warning("%s", warning)
    if strict and not reached:
        raise CapExceededBeforeThreshold(run)
    return run
