"""End-to-end augmentation: sketches → fills → questions → dataset.

``augment`` enumerates sketches until the labeled corpus's patterns are
sufficiently covered, fills each distinct pattern against every supplied
database, keeps the executable queries, renders a question for each, and
returns examples plus a statistics report.  Work fans out per (database,
sketch) to a thread pool; results are merged in a canonical order, so the
output is identical for any pool size.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .ast import Pattern, extract_pattern, serialize_sql
from .clauses import sql_to_question
from .generate import FillConfig, fill_sketch, filter_executable, stable_seed
from .grammar import (
    CapExceeded,
    CoverageRun,
    Grammar,
    SketchTree,
    enumerate_sketches,
    generate_until_coverage,
    resolve_grammar,
)
from .jsonl import write_records
from .parser import parse_sql
from .schema import DatabaseContent, Schema

log = logging.getLogger(__name__)

CONSTRUCT_FLAGS = ("select", "where", "group", "having", "order",
                   "calculation", "nested", "multi")

_FLAG_TOKENS = {
    "select": ("SELECT",),
    "where": ("WHERE",),
    "group": ("GROUP_BY",),
    "having": ("HAVING",),
    "order": ("ORDER_BY",),
    "calculation": ("CALC",),
    "nested": ("NESTED_OPEN",),
    "multi": ("INTERSECT", "UNION", "EXCEPT"),
}


class PipelineError(RuntimeError):
    """A stage failed; the message carries the stage and subject."""


@dataclass(frozen=True)
class AugmentConfig:
    seed: int = 0
    coverage_threshold: float = 0.8
    start_level: tuple[int, int] = (2, 2)
    fallback_level: tuple[int, int] = (4, 3)
    sketch_cap: int = 10 ** 6
    max_fills_per_sketch_per_db: int = 8
    attempts_per_fill: int = 40
    allow_value_perturbation: bool = False
    require_nonempty: bool = False
    workers: int = 1
    question_variant: Optional[int] = None

    def fill_config(self) -> FillConfig:
        return FillConfig(
            rng_seed=self.seed,
            max_fills_per_sketch_per_db=self.max_fills_per_sketch_per_db,
            allow_value_perturbation=self.allow_value_perturbation,
            attempts_per_fill=self.attempts_per_fill,
        )


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(AugmentConfig)}


def load_config(path: Union[str, Path]) -> AugmentConfig:
    """Read `key = value` lines (# comments allowed) into a config."""
    values: dict = {}
    for number, raw in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{number}: expected key = value")
        key, _, text = line.partition("=")
        key = key.strip().replace("-", "_")
        text = text.strip()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"{path}:{number}: unknown setting {key!r}")
        values[key] = _parse_config_value(key, text)
    return AugmentConfig(**values)


def _parse_config_value(key: str, text: str):
    if key in ("start_level", "fallback_level"):
        parts = [p for p in text.replace(",", " ").split() if p]
        if len(parts) != 2:
            raise ValueError(f"{key} needs two integers, got {text!r}")
        return (int(parts[0]), int(parts[1]))
    if key == "question_variant":
        return None if text.lower() in ("", "none") else int(text)
    if key == "coverage_threshold":
        return float(text)
    if key in ("allow_value_perturbation", "require_nonempty"):
        return text.lower() in ("1", "true", "yes", "on")
    return int(text)


@dataclass(frozen=True)
class AugmentedExample:
    question: str
    sql: str
    db_id: str
    pattern: str
    sketch_id: str
    fill_seed: int
    translator_id: str

    def record(self) -> dict:
        return {
            "question": self.question,
            "sql": self.sql,
            "db_id": self.db_id,
            "pattern": self.pattern,
            "sketch_id": self.sketch_id,
            "fill_seed": self.fill_seed,
            "translator_id": self.translator_id,
        }


@dataclass
class StatsReport:
    labeled_size: int = 0
    generated_size: int = 0
    labeled_patterns: int = 0
    generated_patterns: int = 0
    shared_patterns: int = 0
    coverage: float = 0.0
    coverage_reached: bool = False
    final_level: Optional[tuple[int, int]] = None
    per_db: dict = field(default_factory=dict)
    deduped: int = 0
    dropped_nonexecutable: int = 0
    unfillable: int = 0
    labeled_flags: dict = field(default_factory=dict)
    generated_flags: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_markdown(self) -> str:
        def mark(flags: dict, name: str) -> str:
            return "yes" if flags.get(name) else "no"

        header = ("| dataset | size | patterns | coverage | "
                  + " | ".join(CONSTRUCT_FLAGS) + " |")
        sep = "|" + " --- |" * (4 + len(CONSTRUCT_FLAGS))
        labeled = (f"| labeled | {self.labeled_size} | "
                   f"{self.labeled_patterns} | - | "
                   + " | ".join(mark(self.labeled_flags, f)
                                for f in CONSTRUCT_FLAGS) + " |")
        generated = (f"| generated | {self.generated_size} | "
                     f"{self.generated_patterns} | {self.coverage:.3f} | "
                     + " | ".join(mark(self.generated_flags, f)
                                  for f in CONSTRUCT_FLAGS) + " |")
        lines = [header, sep, labeled, generated]
        if self.per_db:
            lines.append("")
            lines.append("| database | examples |")
            lines.append("| --- | --- |")
            for db_id in sorted(self.per_db):
                lines.append(f"| {db_id} | {self.per_db[db_id]} |")
        for warning in self.warnings:
            lines.append("")
            lines.append(f"*warning: {warning}*")
        return "\n".join(lines)


def construct_flags(patterns: Sequence[Pattern]) -> dict:
    flags = {}
    tokens = {t for p in patterns for t in p}
    for name in CONSTRUCT_FLAGS:
        flags[name] = any(t in tokens for t in _FLAG_TOKENS[name])
    return flags


def labeled_patterns(corpus: Sequence[dict],
                     schemas: dict[str, Schema]) -> tuple[list[Pattern], int]:
    """Patterns of the labeled examples; returns (patterns, skipped)."""
    patterns = []
    skipped = 0
    for example in corpus:
        schema = schemas.get(example.get("db_id", ""))
        try:
            ast = parse_sql(example["query"], schema)
        except Exception as exc:
            log.warning("unparsable labeled query %r: %s",
                        example.get("query", "")[:80], exc)
            skipped += 1
            continue
        patterns.append(extract_pattern(ast))
    return patterns, skipped


def _distinct_sketches(sketches: Sequence[SketchTree]
                       ) -> list[tuple[int, SketchTree, Pattern]]:
    """First sketch per distinct pattern, keeping enumeration order."""
    seen = set()
    out = []
    for sketch in sketches:
        pattern = sketch.pattern()
        if pattern in seen:
            continue
        seen.add(pattern)
        out.append((len(out), sketch, pattern))
    return out


def augment(schemas: Sequence[Schema], contents: dict[str, DatabaseContent],
            grammar: Union[Grammar, str, Path], corpus: Sequence[dict],
            translator, config: AugmentConfig = AugmentConfig()
            ) -> tuple[list[AugmentedExample], StatsReport]:
    """Generate, fill, filter, and question-ize; deterministic per config."""
    grammar = resolve_grammar(grammar)
    stats = StatsReport(config=dataclasses.asdict(config))
    log.info("resolved config: %s", stats.config)

    corpus_patterns, skipped = labeled_patterns(corpus, {
        s.db_id: s for s in schemas})
    if skipped:
        stats.warnings.append(f"{skipped} labeled queries failed to parse")
    stats.labeled_size = len(corpus)
    distinct_labeled = {tuple(p) for p in corpus_patterns}
    stats.labeled_patterns = len(distinct_labeled)
    stats.labeled_flags = construct_flags(corpus_patterns)

    if not schemas:
        stats.warnings.append("no schemas supplied; nothing generated")
        return [], stats

    if corpus_patterns:
        run: CoverageRun = generate_until_coverage(
            grammar, corpus_patterns, threshold=config.coverage_threshold,
            start_level=config.start_level, cap=config.sketch_cap)
        if run.warning:
            stats.warnings.append(run.warning)
        sketches = run.sketches
        stats.coverage = run.coverage
        stats.coverage_reached = run.reached
        stats.final_level = run.final_level
    else:
        stats.warnings.append(
            "empty labeled corpus; enumerating at the fallback level")
        try:
            sketches = enumerate_sketches(grammar, config.fallback_level,
                                          cap=config.sketch_cap)
        except CapExceeded as exc:
            stats.warnings.append(f"fallback enumeration hit the cap: {exc}")
            sketches = []
        stats.final_level = config.fallback_level

    jobs = _distinct_sketches(sketches)
    fill_cfg = config.fill_config()
    ordered_schemas = sorted(schemas, key=lambda s: s.db_id)
    translate_inline = getattr(translator, "thread_safe", False)

    def run_job(args):
        schema, sketch_index, sketch, pattern = args
        content = contents.get(schema.db_id)
        if content is None:
            return (schema.db_id, sketch_index, "missing-content", [])
        fills = fill_sketch(sketch, schema, content, fill_cfg)
        if not fills:
            return (schema.db_id, sketch_index, "unfillable", [])
        kept = filter_executable(fills, content,
                                 require_nonempty=config.require_nonempty)
        dropped = len(fills) - len(kept)
        rows = []
        for fill_index, ast in enumerate(kept):
            question = (sql_to_question(ast, translator, schema,
                                        config.question_variant)
                        if translate_inline else None)
            rows.append((fill_index, ast, question))
        return (schema.db_id, sketch_index, f"dropped:{dropped}", rows)

    job_args = [(schema, index, sketch, pattern)
                for schema in ordered_schemas
                for index, sketch, pattern in jobs]

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_job, job_args))
    else:
        results = [run_job(args) for args in job_args]

    results.sort(key=lambda r: (r[0], r[1]))
    sketch_by_index = {index: (sketch, pattern)
                       for index, sketch, pattern in jobs}
    schema_by_id = {s.db_id: s for s in ordered_schemas}

    examples: list[AugmentedExample] = []
    seen_sql = set()
    generated_patterns = []
    for db_id, sketch_index, note, rows in results:
        if note == "unfillable":
            stats.unfillable += 1
            continue
        if note.startswith("dropped:"):
            stats.dropped_nonexecutable += int(note.split(":", 1)[1])
        for fill_index, ast, question in rows:
            sql = serialize_sql(ast)
            if (db_id, sql) in seen_sql:
                stats.deduped += 1
                continue
            seen_sql.add((db_id, sql))
            if question is None:
                question = sql_to_question(ast, translator,
                                           schema_by_id[db_id],
                                           config.question_variant)
            sketch, pattern = sketch_by_index[sketch_index]
            example = AugmentedExample(
                question=question,
                sql=sql,
                db_id=db_id,
                pattern=" ".join(pattern),
                sketch_id=sketch.sketch_id,
                fill_seed=stable_seed(config.seed, db_id, " ".join(pattern)),
                translator_id=getattr(translator, "translator_id",
                                      type(translator).__name__),
            )
            _self_check(example, schema_by_id[db_id])
            examples.append(example)
            generated_patterns.append(pattern)
            stats.per_db[db_id] = stats.per_db.get(db_id, 0) + 1

    stats.generated_size = len(examples)
    distinct_generated = set(generated_patterns)
    stats.generated_patterns = len(distinct_generated)
    stats.shared_patterns = len(distinct_labeled & distinct_generated)
    stats.generated_flags = construct_flags(generated_patterns)
    if not examples:
        stats.warnings.append("no examples generated")
    return examples, stats


def _self_check(example: AugmentedExample, schema: Schema) -> None:
    """Every emitted example must re-parse and keep its pattern."""
    try:
        ast = parse_sql(example.sql, schema)
    except Exception as exc:
        raise PipelineError(
            f"self-check: emitted SQL does not parse ({example.sql!r})"
        ) from exc
    got = " ".join(extract_pattern(ast))
    if got != example.pattern:
        raise PipelineError(
            f"self-check: pattern drift on {example.sql!r}: "
            f"{got!r} != {example.pattern!r}")


def write_examples(examples: Sequence[AugmentedExample],
                   path: Union[str, Path]) -> int:
    return write_records(path, (e.record() for e in examples))


def dataset_stats(labeled: Sequence[dict], generated: Sequence[dict],
                  schemas: Optional[dict[str, Schema]] = None) -> StatsReport:
    """Statistics over already-materialized datasets (JSONL records)."""
    stats = StatsReport()
    stats.labeled_size = len(labeled)
    stats.generated_size = len(generated)

    lab_patterns, skipped = labeled_patterns(labeled, schemas or {})
    if skipped:
        stats.warnings.append(f"{skipped} labeled queries failed to parse")
    gen_patterns = []
    for record in generated:
        if "pattern" in record:
            gen_patterns.append(tuple(record["pattern"].split()))
        else:
            try:
                ast = parse_sql(record["sql"] if "sql" in record
                                else record["query"])
            except Exception:
                continue
            gen_patterns.append(extract_pattern(ast))

    distinct_labeled = {tuple(p) for p in lab_patterns}
    distinct_generated = set(gen_patterns)
    stats.labeled_patterns = len(distinct_labeled)
    stats.generated_patterns = len(distinct_generated)
    stats.shared_patterns = len(distinct_labeled & distinct_generated)
    stats.coverage = (stats.shared_patterns / len(distinct_labeled)
                      if distinct_labeled else 0.0)
    stats.labeled_flags = construct_flags(lab_patterns)
    stats.generated_flags = construct_flags(gen_patterns)
    return stats
