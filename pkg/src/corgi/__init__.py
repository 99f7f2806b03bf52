"""CORGI-style pattern matching: incremental relation graphs with lazy match iteration."""

from .errors import CorgiError
from .facts import (
    Fact,
    Schema,
    TypeRegistry,
    WorkingMemory,
    define_schema,
    load_facts,
    render_fact,
)
from .patterns import (
    AlphaLiteral,
    BetaLiteral,
    Comparator,
    Conjunction,
    OrderStrategy,
    SelfLiteral,
    Var,
    parse_pattern,
    to_standard_form,
)
from .relgraph import RelationGraph, beta_eval, compile_pattern
from .matchiter import Match, MatchIterator, count_materialized, has_match, iterator
from .oracle import enumerate_all, equivalent

__all__ = [
    "AlphaLiteral",
    "BetaLiteral",
    "Comparator",
    "Conjunction",
    "CorgiError",
    "Fact",
    "Match",
    "MatchIterator",
    "OrderStrategy",
    "RelationGraph",
    "Schema",
    "SelfLiteral",
    "TypeRegistry",
    "Var",
    "WorkingMemory",
    "beta_eval",
    "compile_pattern",
    "count_materialized",
    "define_schema",
    "enumerate_all",
    "equivalent",
    "has_match",
    "iterator",
    "load_facts",
    "parse_pattern",
    "render_fact",
    "to_standard_form",
]
