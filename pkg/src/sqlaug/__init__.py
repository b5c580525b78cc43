"""SQL-to-question data augmentation for cross-domain text-to-SQL.

The package generates new training pairs for a text-to-SQL parser in two
steps: enumerate SQL query sketches from a small grammar and bind them
against unseen database schemas (keeping only executable queries), then
render each query as a natural-language question clause by clause.
"""

__version__ = "0.1.0"

from .ast import (
    SqlAst,
    extract_pattern,
    pattern_from_text,
    pattern_to_text,
    serialize_sql,
)
from .parser import SqlSyntaxError, UnknownIdentifierError, parse_sql
from .schema import (
    DatabaseContent,
    Schema,
    content_from_rows,
    join_path,
    load_content,
    load_schema,
    load_schemas,
)
from .grammar import (
    ComplexityLevel,
    CoverageRun,
    Grammar,
    default_grammar,
    enumerate_sketches,
    generate_until_coverage,
    level_schedule,
    load_grammar,
    resolve_grammar,
)
from .generate import FillConfig, fill_sketch, filter_executable, stable_seed
from .evaluate import EvalError, ResultTable, execute
from .clauses import (
    Clause,
    Subquestion,
    compose,
    decompose,
    execution_order,
    sql_to_question,
    translate_clause,
)
from .translate import (
    SubprocessTranslator,
    TemplateTranslator,
    load_learned_variants,
    load_templates,
)
from .align import (
    MiningReport,
    export_corpus,
    filter_pairs,
    link_schema,
    mine_corpus,
    tokenize_question,
)
from .strategies import (
    STRATEGIES,
    EpochPlan,
    InvalidStrategy,
    SampleLargerThanPool,
    plan_epochs,
)
from .pipeline import (
    AugmentConfig,
    AugmentedExample,
    StatsReport,
    augment,
    dataset_stats,
    load_config,
    write_examples,
)
from .jsonl import iter_records, read_records, write_records

__all__ = [
    "__version__",
    # query model
    "SqlAst", "extract_pattern", "pattern_from_text", "pattern_to_text",
    "serialize_sql", "parse_sql", "SqlSyntaxError", "UnknownIdentifierError",
    # schemas and rows
    "Schema", "DatabaseContent", "load_schemas", "load_schema",
    "load_content", "content_from_rows", "join_path",
    # sketch grammar
    "Grammar", "ComplexityLevel", "CoverageRun", "default_grammar",
    "load_grammar", "resolve_grammar", "enumerate_sketches",
    "level_schedule", "generate_until_coverage",
    # filling and execution
    "FillConfig", "fill_sketch", "filter_executable", "stable_seed",
    "EvalError", "ResultTable", "execute",
    # clause decomposition and question synthesis
    "Clause", "Subquestion", "decompose", "execution_order",
    "translate_clause", "compose", "sql_to_question",
    "TemplateTranslator", "SubprocessTranslator", "load_templates",
    "load_learned_variants",
    # question/clause alignment
    "MiningReport", "tokenize_question", "link_schema", "filter_pairs",
    "mine_corpus", "export_corpus",
    # training strategies
    "STRATEGIES", "EpochPlan", "InvalidStrategy", "SampleLargerThanPool",
    "plan_epochs",
    # pipeline
    "AugmentConfig", "AugmentedExample", "StatsReport", "augment",
    "dataset_stats", "load_config", "write_examples",
    # JSONL helpers
    "iter_records", "read_records", "write_records",
]
