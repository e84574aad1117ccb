"""Logical fact-checking benchmarks and consistency metrics over knowledge graphs."""

__version__ = "0.1.0"

from .kg import KnowledgeGraph, Triplet, bounded_bfs, contains, fixture_kg, load_triples  # noqa: E402
from .logic import (  # noqa: E402
    And,
    Atom,
    Exists,
    ForAllNeg,
    Not,
    Or,
    atoms,
    evaluate_truth,
    negate,
    parse_fact,
    serialize_fact,
    to_cnf,
    to_dnf,
)

__all__ = [
    "And",
    "Atom",
    "Exists",
    "ForAllNeg",
    "KnowledgeGraph",
    "Not",
    "Or",
    "Triplet",
    "atoms",
    "bounded_bfs",
    "contains",
    "evaluate_truth",
    "fixture_kg",
    "load_triples",
    "negate",
    "parse_fact",
    "serialize_fact",
    "to_cnf",
    "to_dnf",
]
