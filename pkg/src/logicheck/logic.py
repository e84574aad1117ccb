"""Propositional fact AST, closed-world truth, and DNF/CNF normalization.

Facts are immutable and hashable. ``And``/``Or`` keep their children in the
given order; commutativity is something the benchmark tests, so it is never
normalized away.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Union

from .kg import KnowledgeGraph, Triplet


class FactError(ValueError):
    pass


class FactSchemaError(FactError):
    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


@dataclass(frozen=True)
class Atom:
    triplet: Triplet


@dataclass(frozen=True)
class Not:
    child: Fact


@dataclass(frozen=True)
class And:
    children: tuple[Fact, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise FactError("and needs at least 2 children")


@dataclass(frozen=True)
class Or:
    children: tuple[Fact, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise FactError("or needs at least 2 children")


@dataclass(frozen=True)
class Exists:
    """exists x. r1(subject, x) and r2(x, object)"""

    subject: str
    r1: str
    r2: str
    object: str


@dataclass(frozen=True)
class ForAllNeg:
    """forall x. not r1(subject, x) or not r2(x, object)"""

    subject: str
    r1: str
    r2: str
    object: str


Fact = Union[Atom, Not, And, Or, Exists, ForAllNeg]
Literal_ = tuple[Triplet, bool]  # (triplet, negated)


def atom(s: str, r: str, o: str) -> Atom:
    return Atom(Triplet(s, r, o))


def conj(*children: Fact) -> And:
    return And(children)


def disj(*children: Fact) -> Or:
    return Or(children)


# -- truth ---------------------------------------------------------------


def two_hop_witnesses(
    member: Callable[[Triplet], bool],
    successors: Callable[[str, str], Iterable[str]],
    subject: str,
    r1: str,
    r2: str,
    obj: str,
) -> list[str]:
    return [x for x in successors(subject, r1) if member(Triplet(x, r2, obj))]


def evaluate(fact: Fact, atom_truth: Callable[[Triplet], bool], exists_truth=None) -> bool:
    """Fold ``fact`` given a truth function for atoms (and for two-hop forms)."""
    if isinstance(fact, Atom):
        return atom_truth(fact.triplet)
    if isinstance(fact, Not):
        return not evaluate(fact.child, atom_truth, exists_truth)
    if isinstance(fact, And):
        return all(evaluate(c, atom_truth, exists_truth) for c in fact.children)
    if isinstance(fact, Or):
        return any(evaluate(c, atom_truth, exists_truth) for c in fact.children)
    if isinstance(fact, (Exists, ForAllNeg)):
        if exists_truth is None:
            raise FactError("quantified fact needs an existential truth function")
        found = exists_truth(fact.subject, fact.r1, fact.r2, fact.object)
        return found if isinstance(fact, Exists) else not found
    raise TypeError(f"not a fact: {fact!r}")


def evaluate_truth(kg: KnowledgeGraph, fact: Fact) -> bool:
    """T(fact) under closed-world semantics over ``kg``."""

    def exists(s, r1, r2, o):
        for name in (s, o):
            kg.entity_id(name)
        kg.relation_id(r2)
        return bool(two_hop_witnesses(kg.contains, kg.objects, s, r1, r2, o))

    return evaluate(fact, kg.contains, exists)


def negate(fact: Fact) -> Fact:
    if isinstance(fact, Not):
        return fact.child
    if isinstance(fact, Exists):
        return ForAllNeg(fact.subject, fact.r1, fact.r2, fact.object)
    if isinstance(fact, ForAllNeg):
        return Exists(fact.subject, fact.r1, fact.r2, fact.object)
    return Not(fact)


# -- normal forms ----------------------------------------------------------


@dataclass(frozen=True)
class NormalForm:
    kind: Literal["DNF", "CNF"]
    clauses: tuple[tuple[Literal_, ...], ...]

    def evaluate(self, atom_truth: Callable[[Triplet], bool]) -> bool:
        lit = lambda l: atom_truth(l[0]) != l[1]  # noqa: E731
        if self.kind == "DNF":
            return any(all(lit(l) for l in c) for c in self.clauses)
        return all(any(lit(l) for l in c) for c in self.clauses)

    def literals(self) -> list[Literal_]:
        return [l for c in self.clauses for l in c]


def _nnf(fact: Fact, negated: bool = False):
    """Push negations to the leaves. Returns ('lit', literal) | ('and'|'or', [..])."""
    if isinstance(fact, Atom):
        return ("lit", (fact.triplet, negated))
    if isinstance(fact, Not):
        return _nnf(fact.child, not negated)
    if isinstance(fact, (And, Or)):
        is_and = isinstance(fact, And) != negated
        return ("and" if is_and else "or", [_nnf(c, negated) for c in fact.children])
    raise FactError("not propositional: quantified facts have no DNF/CNF")


def _clauses(node, outer: str) -> list[tuple[Literal_, ...]]:
    """Clause list where ``outer`` joins clauses and the other operator joins literals."""
    tag, body = node
    if tag == "lit":
        return [(body,)]
    parts = [_clauses(c, outer) for c in body]
    if tag == outer:
        return [cl for p in parts for cl in p]
    # distribute: pick one clause from each part and merge
    return [tuple(l for cl in combo for l in cl) for combo in itertools.product(*parts)]


def _dedupe(clauses: list[tuple[Literal_, ...]]) -> tuple[tuple[Literal_, ...], ...]:
    out = []
    for cl in clauses:
        out.append(tuple(dict.fromkeys(cl)))
    return tuple(out)


def to_dnf(fact: Fact) -> NormalForm:
    return NormalForm("DNF", _dedupe(_clauses(_nnf(fact), "or")))


def to_cnf(fact: Fact) -> NormalForm:
    return NormalForm("CNF", _dedupe(_clauses(_nnf(fact), "and")))


def atoms(fact: Fact) -> list[Literal_]:
    """Literals left to right, with negations pushed down to the leaves."""
    out: list[Literal_] = []

    def walk(node):
        tag, body = node
        if tag == "lit":
            out.append(body)
        else:
            for c in body:
                walk(c)

    walk(_nnf(fact))
    return out


def triplets_of(fact: Fact) -> list[Triplet]:
    """Distinct triplets mentioned by a propositional fact, first-seen order."""
    return list(dict.fromkeys(t for t, _ in atoms(fact)))


# -- JSON ------------------------------------------------------------------


def fact_to_obj(fact: Fact) -> dict:
    if isinstance(fact, Atom):
        s, r, o = fact.triplet
        return {"op": "atom", "s": s, "r": r, "o": o}
    if isinstance(fact, Not):
        return {"op": "not", "arg": fact_to_obj(fact.child)}
    if isinstance(fact, (And, Or)):
        op = "and" if isinstance(fact, And) else "or"
        return {"op": op, "args": [fact_to_obj(c) for c in fact.children]}
    if isinstance(fact, (Exists, ForAllNeg)):
        op = "exists" if isinstance(fact, Exists) else "forall_neg"
        return {"op": op, "s": fact.subject, "r1": fact.r1, "r2": fact.r2, "o": fact.object}
    raise TypeError(f"not a fact: {fact!r}")


def _str_field(obj: dict, key: str, pointer: str) -> str:
    val = obj.get(key)
    if not isinstance(val, str) or not val:
        raise FactSchemaError(f"{pointer}/{key}", "expected non-empty string")
    return val


def fact_from_obj(obj, pointer: str = "") -> Fact:
    if not isinstance(obj, dict):
        raise FactSchemaError(pointer, "expected object")
    op = obj.get("op")
    if op == "atom":
        return Atom(Triplet(*(_str_field(obj, k, pointer) for k in ("s", "r", "o"))))
    if op == "not":
        if "arg" not in obj:
            raise FactSchemaError(f"{pointer}/arg", "missing")
        return Not(fact_from_obj(obj["arg"], f"{pointer}/arg"))
    if op in ("and", "or"):
        args = obj.get("args")
        if not isinstance(args, list):
            raise FactSchemaError(f"{pointer}/args", "expected array")
        if len(args) < 2:
            raise FactSchemaError(f"{pointer}/args", f"{op} needs at least 2 args, got {len(args)}")
        children = tuple(fact_from_obj(a, f"{pointer}/args/{i}") for i, a in enumerate(args))
        return And(children) if op == "and" else Or(children)
    if op in ("exists", "forall_neg"):
        fields = [_str_field(obj, k, pointer) for k in ("s", "r1", "r2", "o")]
        return Exists(*fields) if op == "exists" else ForAllNeg(*fields)
    raise FactSchemaError(f"{pointer}/op", f"unknown op {op!r}")


def serialize_fact(fact: Fact) -> str:
    return json.dumps(fact_to_obj(fact), ensure_ascii=False, separators=(",", ":"))


def parse_fact(text: str) -> Fact:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FactSchemaError("", f"invalid JSON: {exc}") from None
    return fact_from_obj(obj)
