"""Command-line front end.

Every subcommand writes its data to ``--out`` (or standard output) and
its diagnostics to standard error.  Exit codes: 0 on success, 1 on a
user error (bad arguments, unreadable inputs, unparsable SQL), 2 on an
internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import traceback
import warnings
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import __version__
from .align import export_corpus, mine_corpus
from .ast import pattern_from_text, pattern_to_text, serialize_sql
from .clauses import decompose, sql_to_question
from .evaluate import EvalError, execute
from .generate import FillConfig, fill_sketch, filter_executable
from .grammar import CapExceeded, generate_until_coverage, resolve_grammar
from .jsonl import read_records, write_records
from .parser import parse_sql
from .pipeline import (AugmentConfig, augment, dataset_stats, labeled_patterns,
                       load_config, write_examples)
from .schema import DatabaseContent, Schema, load_content, load_schema, \
    load_schemas
from .strategies import STRATEGIES, plan_epochs
from .translate import TemplateTranslator, load_learned_variants

log = logging.getLogger(__name__)

# Anything below is the caller's problem, not a bug: report and exit 1.
_USER_ERRORS = (ValueError, LookupError, OSError, EvalError, CapExceeded)


class _UsageError(Exception):
    """Bad invocation; carries the parser whose help should print."""

    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    """argparse that defers usage failures to our exit-code handling."""

    def error(self, message):
        raise _UsageError(self, message)


# ---------------------------------------------------------------------------
# Shared input/output helpers
# ---------------------------------------------------------------------------


def _emit_lines(args, lines: Iterable[str]) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
    else:
        for line in lines:
            sys.stdout.write(line + "\n")


def _emit_jsonl(args, records: Iterable[dict]) -> int:
    if args.out:
        return write_records(args.out, records)
    count = 0
    for record in records:
        sys.stdout.write(json.dumps(record, ensure_ascii=False) + "\n")
        count += 1
    return count


def _schema_map(path) -> dict[str, Schema]:
    return {s.db_id: s for s in load_schemas(path)}


def _load_contents(root, schemas: Sequence[Schema]
                   ) -> dict[str, DatabaseContent]:
    """Rows per database from ``<root>/<db_id>.json`` or a
    ``<root>/<db_id>/`` directory of CSV files.  A plain file path works
    when exactly one schema is in play."""
    root = Path(root)
    if root.is_file():
        if len(schemas) != 1:
            raise ValueError(
                f"{root} is a single content file but {len(schemas)} "
                "schemas were loaded; pass a directory instead")
        only = schemas[0]
        return {only.db_id: load_content(root, only)}
    contents = {}
    for schema in schemas:
        json_path = root / f"{schema.db_id}.json"
        csv_dir = root / schema.db_id
        if json_path.is_file():
            contents[schema.db_id] = load_content(json_path, schema)
        elif csv_dir.is_dir():
            contents[schema.db_id] = load_content(csv_dir, schema)
        else:
            raise FileNotFoundError(
                f"no content for {schema.db_id!r} under {root} (expected "
                f"{schema.db_id}.json or {schema.db_id}/)")
    return contents


def _one_schema(args) -> Optional[Schema]:
    if args.schemas and args.db:
        return load_schema(args.schemas, args.db)
    if args.schemas or args.db:
        args._parser.error("--schemas and --db go together")
    return None


def _translator(args) -> TemplateTranslator:
    corpus = getattr(args, "corpus", None)
    learned = load_learned_variants(corpus) if corpus else None
    return TemplateTranslator(learned=learned)


def _augment_config(args) -> AugmentConfig:
    config = load_config(args.config) if args.config else AugmentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threshold is not None:
        overrides["coverage_threshold"] = args.threshold
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.variant is not None:
        overrides["question_variant"] = args.variant
    return dataclasses.replace(config, **overrides) if overrides else config


def _parse_level(text: str) -> tuple[int, int]:
    parts = [p for p in text.replace(",", " ").replace("x", " ").split() if p]
    if len(parts) != 2:
        raise ValueError(f"level needs two integers like '4,3', got {text!r}")
    return int(parts[0]), int(parts[1])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_gen_sketches(args) -> int:
    grammar = resolve_grammar(args.grammar)
    if args.train:
        schemas = _schema_map(args.schemas) if args.schemas else {}
        patterns, skipped = labeled_patterns(read_records(args.train), schemas)
        if skipped:
            print(f"warning: {skipped} corpus queries failed to parse",
                  file=sys.stderr)
        run = generate_until_coverage(grammar, patterns,
                                      threshold=args.threshold)
        for report in run.levels:
            print(f"level {tuple(report.level)}: {report.new_patterns} new"
                  f" patterns, coverage {report.coverage:.3f}",
                  file=sys.stderr)
        status = "reached" if run.reached else "NOT reached"
        print(f"coverage {run.coverage:.3f} ({status}) at level "
              f"{tuple(run.final_level)}; {len(run.sketches)} sketches",
              file=sys.stderr)
        sketches = run.sketches
    elif args.level:
        from .grammar import enumerate_sketches
        sketches = enumerate_sketches(grammar, _parse_level(args.level))
        print(f"{len(sketches)} sketches at level {args.level}",
              file=sys.stderr)
    else:
        args._parser.error("need --level D,B or --train corpus.jsonl")
    seen = set()
    lines = []
    for sketch in sketches:
        pattern = sketch.pattern()
        if pattern in seen:
            continue
        seen.add(pattern)
        lines.append(pattern_to_text(pattern))
    _emit_lines(args, lines)
    return 0


def _cmd_fill(args) -> int:
    schema = load_schema(args.schemas, args.db)
    content = load_content(args.content, schema)
    pattern = pattern_from_text(args.pattern)
    config = FillConfig(rng_seed=args.seed if args.seed is not None else 0,
                        max_fills_per_sketch_per_db=args.max_fills)
    queries = fill_sketch(pattern, schema, content, config)
    if args.executable:
        queries = filter_executable(queries, content)
    _emit_lines(args, [serialize_sql(q) for q in queries])
    print(f"{len(queries)} fills for {args.db}", file=sys.stderr)
    return 0


def _cmd_augment(args) -> int:
    schemas = load_schemas(args.schemas)
    contents = _load_contents(args.content, schemas)
    corpus = read_records(args.train)
    examples, stats = augment(schemas, contents, args.grammar, corpus,
                              _translator(args), _augment_config(args))
    if args.out:
        write_examples(examples, args.out)
    else:
        _emit_jsonl(args, (e.record() for e in examples))
    print(stats.to_markdown(), file=sys.stderr)
    return 0


def _cmd_decompose(args) -> int:
    schema = _one_schema(args)
    ast = parse_sql(args.sql, schema)
    lines = []
    for clause in decompose(ast, schema):
        text = " ".join(t.text for t in clause.tokens)
        lines.append(f"{clause.kind}\t{text}")
    _emit_lines(args, lines)
    return 0


def _cmd_tosql_question(args) -> int:
    schema = _one_schema(args)
    ast = parse_sql(args.sql, schema)
    question = sql_to_question(ast, _translator(args), schema, args.variant)
    _emit_lines(args, [question])
    return 0


def _cmd_align(args) -> int:
    schemas = _schema_map(args.schemas)
    report = mine_corpus(read_records(args.train), schemas, parse_sql)
    lines = [f"{p.clause.kind}\t{p.clause.text_key()}\t{p.subquestion}"
             for p in report.pairs]
    _emit_lines(args, lines)
    print(f"aligned {report.aligned_clauses}/{report.total_clauses} clauses"
          f" (rate {report.alignment_rate:.3f}) across {report.examples}"
          f" examples; skipped {report.skipped}", file=sys.stderr)
    return 0


def _cmd_export_corpus(args) -> int:
    if not args.out:
        args._parser.error("export-corpus requires --out")
    schemas = _schema_map(args.schemas)
    report = mine_corpus(read_records(args.train), schemas, parse_sql)
    count = export_corpus(report.pairs, args.out)
    print(f"wrote {count} clause/subquestion pairs to {args.out}"
          f" (rate {report.alignment_rate:.3f})", file=sys.stderr)
    return 0


def _cmd_plan_epochs(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        plans = plan_epochs(args.strategy, args.labeled, args.generated,
                            args.epochs,
                            seed=args.seed if args.seed is not None else 0,
                            pretrain_phase=args.pretrain_phase)
    for item in caught:
        print(f"warning: {item.message}", file=sys.stderr)
    _emit_jsonl(args, ({"strategy": p.strategy, "epoch": p.epoch,
                        "labeled_ids": list(p.labeled_ids),
                        "generated_ids": list(p.generated_ids),
                        "seed": p.seed} for p in plans))
    return 0


def _cmd_stats(args) -> int:
    labeled = read_records(args.labeled) if args.labeled else []
    generated = read_records(args.generated) if args.generated else []
    schemas = _schema_map(args.schemas) if args.schemas else None
    report = dataset_stats(labeled, generated, schemas)
    _emit_lines(args, [report.to_markdown()])
    return 0


def _cmd_exec(args) -> int:
    schema = load_schema(args.schemas, args.db)
    content = load_content(args.content, schema)
    ast = parse_sql(args.sql, schema)
    result = execute(ast, content)
    lines = ["\t".join(result.columns)]
    for row in result.rows:
        lines.append("\t".join("" if v is None else str(v) for v in row))
    _emit_lines(args, lines)
    print(f"{len(result.rows)} rows", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, metavar="N",
                        help="random seed (default 0)")
    common.add_argument("--config", metavar="FILE",
                        help="key = value settings file")
    common.add_argument("--out", metavar="PATH",
                        help="write data here instead of standard output")
    common.add_argument("--verbose", action="store_true",
                        help="log progress to standard error")

    parser = _Parser(
        prog="sqlaug",
        description="Grammar-driven SQL generation and question synthesis "
                    "for augmenting text-to-SQL training data.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="<command>")
    subs.required = True

    def command(name: str, fn, help_text: str) -> argparse.ArgumentParser:
        sub = subs.add_parser(name, parents=[common], help=help_text,
                              description=help_text)
        sub.set_defaults(_fn=fn, _parser=sub)
        return sub

    sub = command("gen-sketches", _cmd_gen_sketches,
                  "Enumerate query sketches, one pattern per line.")
    sub.add_argument("--grammar", default="astg.default",
                     help="grammar name or file (default astg.default)")
    sub.add_argument("--level", metavar="D,B",
                     help="enumerate one complexity level, e.g. 4,3")
    sub.add_argument("--train", metavar="JSONL",
                     help="labeled corpus; enumerate levels until its "
                          "patterns are covered")
    sub.add_argument("--schemas", metavar="JSON",
                     help="schema file for parsing the corpus")
    sub.add_argument("--threshold", type=float, default=0.8,
                     help="pattern coverage to reach (default 0.8)")

    sub = command("fill", _cmd_fill,
                  "Bind one sketch against a database, one SQL per line.")
    sub.add_argument("--pattern", required=True,
                     help="sketch pattern, e.g. 'SELECT A WHERE C OP V'")
    sub.add_argument("--schemas", required=True, metavar="JSON")
    sub.add_argument("--db", required=True, help="database id")
    sub.add_argument("--content", required=True, metavar="PATH",
                     help="rows: a JSON file or a CSV directory")
    sub.add_argument("--max-fills", type=int, default=8, metavar="N")
    sub.add_argument("--executable", action="store_true",
                     help="keep only queries that execute")

    sub = command("augment", _cmd_augment,
                  "Run the full generation pipeline over every database.")
    sub.add_argument("--schemas", required=True, metavar="JSON")
    sub.add_argument("--content", required=True, metavar="DIR",
                     help="directory with <db_id>.json or <db_id>/ CSVs")
    sub.add_argument("--grammar", default="astg.default")
    sub.add_argument("--train", required=True, metavar="JSONL",
                     help="labeled corpus steering pattern coverage")
    sub.add_argument("--corpus", metavar="JSONL",
                     help="mined clause/subquestion corpus for phrasing")
    sub.add_argument("--threshold", type=float, default=None)
    sub.add_argument("--workers", type=int, default=None, metavar="N")
    sub.add_argument("--variant", type=int, default=None,
                     help="fixed question phrasing variant")

    sub = command("decompose", _cmd_decompose,
                  "Split one SQL query into its clauses.")
    sub.add_argument("--sql", required=True)
    sub.add_argument("--schemas", metavar="JSON")
    sub.add_argument("--db")

    sub = command("tosql-question", _cmd_tosql_question,
                  "Render one SQL query as a natural-language question.")
    sub.add_argument("--sql", required=True)
    sub.add_argument("--schemas", metavar="JSON")
    sub.add_argument("--db")
    sub.add_argument("--corpus", metavar="JSONL",
                     help="mined clause/subquestion corpus for phrasing")
    sub.add_argument("--variant", type=int, default=None)

    sub = command("align", _cmd_align,
                  "Align labeled questions to clauses; TSV per pair.")
    sub.add_argument("--train", required=True, metavar="JSONL")
    sub.add_argument("--schemas", required=True, metavar="JSON")

    sub = command("export-corpus", _cmd_export_corpus,
                  "Mine and save a clause/subquestion corpus (JSONL).")
    sub.add_argument("--train", required=True, metavar="JSONL")
    sub.add_argument("--schemas", required=True, metavar="JSON")

    sub = command("plan-epochs", _cmd_plan_epochs,
                  "Emit per-epoch training id plans, one JSON per line.")
    sub.add_argument("--strategy", required=True, choices=STRATEGIES)
    sub.add_argument("--labeled", required=True, type=int, metavar="N",
                     help="labeled example count")
    sub.add_argument("--generated", required=True, type=int, metavar="N",
                     help="generated example count")
    sub.add_argument("--epochs", required=True, type=int, metavar="N")
    sub.add_argument("--pretrain-phase", type=int, default=None, metavar="N",
                     help="epochs of generated-only data before fine-tuning")

    sub = command("stats", _cmd_stats,
                  "Size, pattern, and construct statistics as Markdown.")
    sub.add_argument("--labeled", metavar="JSONL")
    sub.add_argument("--generated", metavar="JSONL")
    sub.add_argument("--schemas", metavar="JSON")

    sub = command("exec", _cmd_exec,
                  "Execute one query against loaded rows; TSV result.")
    sub.add_argument("--sql", required=True)
    sub.add_argument("--schemas", required=True, metavar="JSON")
    sub.add_argument("--db", required=True)
    sub.add_argument("--content", required=True, metavar="PATH")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        err.parser.print_help(sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args._fn(args)
    except _UsageError as err:
        err.parser.print_help(sys.stderr)
        print(f"error: {err}", file=sys.stderr)
        return 1
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 -- last-resort internal-error report
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
