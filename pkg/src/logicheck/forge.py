"""Benchmark generation: labeled facts, rule instances, splits, SFT export."""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .kg import KGError, KnowledgeGraph, Triplet
from .logic import (
    And,
    Atom,
    Exists,
    Fact,
    ForAllNeg,
    Not,
    Or,
    evaluate,
    evaluate_truth,
    fact_from_obj,
    fact_to_obj,
    triplets_of,
)

log = logging.getLogger(__name__)

MAX_RETRIES = 50

SIMPLE_TYPES = ("simple_pair",)
COMPOUND_TYPES = ("conj", "disj", "or_and", "and_or")
RULE_TYPES = (
    "rule_comm_or",
    "rule_comm_and",
    "rule_assoc_or",
    "rule_assoc_and",
    "rule_dist_1",
    "rule_dist_2",
    "demorgan_or",
    "demorgan_and",
)
FACT_TYPES = SIMPLE_TYPES + COMPOUND_TYPES + RULE_TYPES + ("fol_pair", "syllogism")

# roles each group must carry, per fact type
ROLES = {
    "simple_pair": ("base", "negation"),
    "conj": ("compound", "constituent:0", "constituent:1"),
    "disj": ("compound", "constituent:0", "constituent:1"),
    "or_and": ("compound", "constituent:0", "constituent:1", "constituent:2"),
    "and_or": ("compound", "constituent:0", "constituent:1", "constituent:2"),
    **{k: ("lhs", "rhs") for k in RULE_TYPES},
    "fol_pair": ("exists", "forall_neg"),
    "syllogism": ("chain", "entailed"),
}


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class LabeledFact:
    id: str
    fact: Fact
    label: bool
    group: str
    fact_type: str
    role: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "fact": fact_to_obj(self.fact),
            "label": self.label,
            "group": self.group,
            "fact_type": self.fact_type,
            "role": self.role,
        }

    @classmethod
    def from_json(cls, obj: dict) -> LabeledFact:
        return cls(
            id=obj["id"],
            fact=fact_from_obj(obj["fact"], "/fact"),
            label=bool(obj["label"]),
            group=obj["group"],
            fact_type=obj["fact_type"],
            role=obj["role"],
        )


@dataclass(frozen=True)
class RuleInstance:
    kind: str
    lhs: Fact
    rhs: Fact


@dataclass(frozen=True)
class SplitSpec:
    train_n: int = 1000
    eval_n: int = 5000
    test_n: int = 5000
    seed: int = 0


def derived_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def type_rng(seed: int, fact_type: str) -> random.Random:
    return random.Random(derived_seed(seed, fact_type))


# -- atoms -----------------------------------------------------------------


def sample_true_atom(kg: KnowledgeGraph, rng: random.Random) -> Atom:
    if not len(kg):
        raise GenerationError("cannot sample from an empty graph")
    return Atom(kg.triple(rng.randrange(len(kg))))


def corrupt_object(kg: KnowledgeGraph, atom: Atom, rng: random.Random) -> Atom:
    """Replace the object of a true atom with another object of the same relation.

    The replacement is drawn from objects seen with this relation elsewhere in
    the graph, excluding every true object of (subject, relation, .).
    """
    u, r, v = atom.triplet
    if not kg.contains(atom.triplet):
        raise GenerationError(f"{atom.triplet} is not a true triple")
    true_objects = set(kg.objects(u, r))
    pool = [e for e in kg.objects_of_relation(r) if e not in true_objects]
    if not pool:
        raise GenerationError(f"no valid corruption for {atom.triplet}")
    pool.sort(key=kg.entity_id)
    return Atom(Triplet(u, r, rng.choice(pool)))


def sample_atom(
    kg: KnowledgeGraph, rng: random.Random, truth: bool, subject: str | None = None
) -> Atom:
    """A true atom, or a corrupted one when ``truth`` is False; retries on dead ends."""
    for _ in range(MAX_RETRIES):
        if subject is None:
            base = sample_true_atom(kg, rng)
        else:
            incident = [t for t in kg.incident(subject) if t.subject == subject]
            if not incident:
                break
            base = Atom(rng.choice(incident))
        if truth:
            return base
        try:
            return corrupt_object(kg, base, rng)
        except GenerationError:
            continue
    raise GenerationError(f"could not sample a {'true' if truth else 'false'} atom")


# -- compound facts --------------------------------------------------------

_COMPOUND_BUILDERS = {
    "conj": (2, lambda a: And(a)),
    "disj": (2, lambda a: Or(a)),
    "or_and": (3, lambda a: Or((a[0], And((a[1], a[2]))))),
    "and_or": (3, lambda a: And((a[0], Or((a[1], a[2]))))),
}


def _assignments_for(fact_type: str, target: bool) -> list[tuple[bool, ...]]:
    arity, build = _COMPOUND_BUILDERS[fact_type]
    out = []
    for bits in itertools.product((True, False), repeat=arity):
        names = [Atom(Triplet(f"x{i}", "r", "y")) for i in range(arity)]
        val = dict(zip((a.triplet for a in names), bits))
        if evaluate(build(names), val.__getitem__) == target:
            out.append(bits)
    return out


def _distinct_atoms(
    kg: KnowledgeGraph, rng: random.Random, truths: Sequence[bool], shared_subject: bool
) -> list[Atom]:
    for _ in range(MAX_RETRIES):
        subject = None
        if shared_subject:
            subject = sample_true_atom(kg, rng).triplet.subject
        try:
            out = [sample_atom(kg, rng, t, subject) for t in truths]
        except GenerationError:
            continue
        if len({a.triplet for a in out}) == len(out):
            return out
    raise GenerationError("could not sample distinct atoms")


def _group_id(fact_type: str, i: int) -> str:
    return f"{fact_type}-{i:05d}"


def _simple_pairs(kg, n, rng) -> list[LabeledFact]:
    out, seen = [], set()
    for i in range(n):
        for _ in range(MAX_RETRIES):
            p = sample_true_atom(kg, rng)
            if p.triplet in seen:
                continue
            try:
                neg = corrupt_object(kg, p, rng)
            except GenerationError:
                continue
            seen.add(p.triplet)
            g = _group_id("simple_pair", len(out) // 2)
            out.append(LabeledFact(f"{g}/base", p, True, g, "simple_pair", "base"))
            out.append(LabeledFact(f"{g}/negation", neg, False, g, "simple_pair", "negation"))
            break
        else:
            log.warning("simple_pair: shortfall at %d of %d", i, n)
            break
    return out


def _compound_batch(kg, fact_type, n, rng, shared_subject) -> list[LabeledFact]:
    arity, build = _COMPOUND_BUILDERS[fact_type]
    choices = {t: _assignments_for(fact_type, t) for t in (True, False)}
    out, seen = [], set()
    made = 0
    for i in range(n):
        target = rng.random() < 0.5
        for _ in range(MAX_RETRIES):
            bits = rng.choice(choices[target])
            try:
                parts = _distinct_atoms(kg, rng, bits, shared_subject)
            except GenerationError:
                continue
            compound = build(parts)
            if compound in seen:
                continue
            seen.add(compound)
            g = _group_id(fact_type, made)
            made += 1
            out.append(LabeledFact(f"{g}/compound", compound, target, g, fact_type, "compound"))
            for j, (a, b) in enumerate(zip(parts, bits)):
                role = f"constituent:{j}"
                out.append(LabeledFact(f"{g}/{role}", a, b, g, fact_type, role))
            break
        else:
            log.warning("%s: shortfall at %d of %d", fact_type, i, n)
            break
    return out


def gen_fact_batch(
    kg: KnowledgeGraph,
    fact_type: str,
    n: int,
    rng: random.Random,
    shared_subject: bool = False,
) -> list[LabeledFact]:
    """Generate ``n`` groups of ``fact_type`` as labeled member facts.

    Compound groups are label-balanced: the compound truth is drawn 50/50,
    then a constituent truth assignment realizing it is picked uniformly.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if fact_type == "simple_pair":
        facts = _simple_pairs(kg, n, rng)
    elif fact_type in _COMPOUND_BUILDERS:
        facts = _compound_batch(kg, fact_type, n, rng, shared_subject)
    elif fact_type in RULE_TYPES:
        facts = rule_facts(kg, gen_rule_instances(kg, fact_type, n, rng))
    elif fact_type == "fol_pair":
        facts = gen_fol_pairs(kg, n, rng)
    elif fact_type == "syllogism":
        facts = rule_facts(kg, gen_syllogism(kg, n, rng))
    else:
        raise ValueError(f"unknown fact type {fact_type!r}")
    for f in facts:
        if f.label != evaluate_truth(kg, f.fact):
            raise AssertionError(f"label drift on {f.id}")
    return facts


# -- rules -----------------------------------------------------------------

_RULE_TEMPLATES = {
    "rule_comm_or": (3, lambda p, q, s: (Or((p, q)), Or((q, p)))),
    "rule_comm_and": (3, lambda p, q, s: (And((p, q)), And((q, p)))),
    "rule_assoc_or": (3, lambda p, q, s: (Or((Or((p, q)), s)), Or((p, Or((q, s)))))),
    "rule_assoc_and": (3, lambda p, q, s: (And((And((p, q)), s)), And((p, And((q, s)))))),
    "rule_dist_1": (
        3,
        lambda p, q, s: (And((p, Or((q, s)))), Or((And((p, q)), And((p, s))))),
    ),
    "rule_dist_2": (
        3,
        lambda p, q, s: (Or((p, And((q, s)))), And((Or((p, q)), Or((p, s))))),
    ),
    "demorgan_or": (3, lambda p, q, s: (Not(Or((p, q))), And((Not(p), Not(q))))),
    "demorgan_and": (3, lambda p, q, s: (Not(And((p, q))), Or((Not(p), Not(q))))),
}


def truth_table_equal(lhs: Fact, rhs: Fact) -> bool:
    ts = list(dict.fromkeys(triplets_of(lhs) + triplets_of(rhs)))
    for bits in itertools.product((False, True), repeat=len(ts)):
        val = dict(zip(ts, bits))
        if evaluate(lhs, val.__getitem__) != evaluate(rhs, val.__getitem__):
            return False
    return True


def gen_rule_instances(
    kg: KnowledgeGraph, rule_kind: str, n: int, rng: random.Random
) -> list[RuleInstance]:
    """Instances of a propositional law; atom truths are drawn 50/50 each."""
    if n <= 0:
        raise ValueError("n must be positive")
    try:
        _, build = _RULE_TEMPLATES[rule_kind]
    except KeyError:
        raise ValueError(f"unknown rule kind {rule_kind!r}") from None
    out, seen = [], set()
    for i in range(n):
        for _ in range(MAX_RETRIES):
            truths = [rng.random() < 0.5 for _ in range(3)]
            try:
                p, q, s = _distinct_atoms(kg, rng, truths, False)
            except GenerationError:
                continue
            lhs, rhs = build(p, q, s)
            if lhs in seen:
                continue
            if not truth_table_equal(lhs, rhs):
                raise AssertionError(f"{rule_kind} template is not an equivalence")
            seen.add(lhs)
            out.append(RuleInstance(rule_kind, lhs, rhs))
            break
        else:
            log.warning("%s: shortfall at %d of %d", rule_kind, i, n)
            break
    return out


def rule_facts(kg: KnowledgeGraph, instances: Iterable[RuleInstance]) -> list[LabeledFact]:
    out = []
    for i, inst in enumerate(instances):
        g = _group_id(inst.kind, i)
        roles = ("chain", "entailed") if inst.kind == "syllogism" else ("lhs", "rhs")
        for role, fact in zip(roles, (inst.lhs, inst.rhs)):
            out.append(
                LabeledFact(f"{g}/{role}", fact, evaluate_truth(kg, fact), g, inst.kind, role)
            )
    return out


# -- first-order and syllogism ---------------------------------------------


def two_hop_paths(kg: KnowledgeGraph) -> list[tuple[Triplet, Triplet]]:
    """Directed paths p -r1-> x -r2-> q with p != q, in triple-id order."""
    out = []
    for first in kg:
        for second in kg.incident(first.object):
            if second.subject == first.object and second.object != first.subject:
                out.append((first, second))
    return out


def gen_fol_pairs(kg: KnowledgeGraph, n: int, rng: random.Random) -> list[LabeledFact]:
    """(Exists, ForAllNeg) pairs; half mined from real paths, half with a corrupted end."""
    if n <= 0:
        raise ValueError("n must be positive")
    paths = two_hop_paths(kg)
    if not paths:
        raise GenerationError("graph has no two-hop paths")
    out, seen = [], set()
    made = 0
    for i in range(n):
        positive = rng.random() < 0.5
        for _ in range(MAX_RETRIES):
            a, b = rng.choice(paths)
            p, r1, r2, q = a.subject, a.relation, b.relation, b.object
            if not positive:
                pool = sorted(kg.objects_of_relation(r2), key=kg.entity_id)
                rng.shuffle(pool)
                q = next(
                    (c for c in pool if not evaluate_truth(kg, Exists(p, r1, r2, c))), None
                )
                if q is None:
                    continue
            ex = Exists(p, r1, r2, q)
            if ex in seen:
                continue
            seen.add(ex)
            g = _group_id("fol_pair", made)
            made += 1
            out.append(LabeledFact(f"{g}/exists", ex, positive, g, "fol_pair", "exists"))
            out.append(
                LabeledFact(
                    f"{g}/forall_neg",
                    ForAllNeg(p, r1, r2, q),
                    not positive,
                    g,
                    "fol_pair",
                    "forall_neg",
                )
            )
            break
        else:
            log.warning("fol_pair: shortfall at %d of %d", i, n)
            break
    return out


def triangles(kg: KnowledgeGraph) -> list[tuple[Triplet, Triplet, Triplet]]:
    """Closed triangles p -r1-> q -r2-> s with some edge p -r3-> s."""
    out = []
    for a, b in two_hop_paths(kg):
        for c in kg.incident(a.subject):
            if c.subject == a.subject and c.object == b.object and c != a:
                out.append((a, b, c))
    return out


def gen_syllogism(kg: KnowledgeGraph, n: int, rng: random.Random) -> list[RuleInstance]:
    if n <= 0:
        raise ValueError("n must be positive")
    tri = triangles(kg)
    if not tri:
        raise GenerationError("graph has no closed triangles")
    order = list(range(len(tri)))
    rng.shuffle(order)
    if n > len(order):
        log.warning("syllogism: shortfall, only %d triangles for %d requested", len(order), n)
    return [
        RuleInstance("syllogism", And((Atom(tri[k][0]), Atom(tri[k][1]))), Atom(tri[k][2]))
        for k in order[:n]
    ]


def generate(
    kg: KnowledgeGraph,
    fact_types: Iterable[str],
    n: int,
    seed: int,
    shared_subject: bool = False,
) -> list[LabeledFact]:
    """All requested fact types, each from its own seed stream."""
    out = []
    for ft in fact_types:
        out.extend(gen_fact_batch(kg, ft, n, type_rng(seed, ft), shared_subject))
    return out


# -- splits and I/O --------------------------------------------------------


def split(
    facts: Sequence[LabeledFact], spec: SplitSpec
) -> tuple[list[LabeledFact], list[LabeledFact], list[LabeledFact]]:
    """Seeded per-type split over whole groups; groups never straddle splits."""
    by_type: dict[str, dict[str, list[LabeledFact]]] = {}
    for f in facts:
        by_type.setdefault(f.fact_type, {}).setdefault(f.group, []).append(f)
    train, evals, test = [], [], []
    for ft in sorted(by_type):
        groups = sorted(by_type[ft])
        type_rng(spec.seed, f"split:{ft}").shuffle(groups)
        want = spec.train_n + spec.eval_n + spec.test_n
        if len(groups) < want:
            log.warning("%s: split shortfall, %d groups for %d requested", ft, len(groups), want)
        cuts = (spec.train_n, spec.train_n + spec.eval_n, want)
        for bucket, lo, hi in zip((train, evals, test), (0,) + cuts[:2], cuts):
            for g in groups[lo:hi]:
                bucket.extend(by_type[ft][g])
    return train, evals, test


def write_facts(facts: Iterable[LabeledFact], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in facts:
            fh.write(json.dumps(f.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_facts(path: str | Path) -> list[LabeledFact]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(LabeledFact.from_json(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def interleave_polarity(records: Sequence[dict]) -> list[dict]:
    """Merge positive and negative records so each polarity is spread evenly.

    Equal counts alternate P,N,P,N. Unequal counts place each minority record
    at its proportional position, so no long single-polarity run forms at the tail.
    """
    pos = [r for r in records if r["label"]]
    neg = [r for r in records if not r["label"]]
    keyed = [((i + 0.5) / len(pos), 0, i, r) for i, r in enumerate(pos)]
    keyed += [((i + 0.5) / len(neg), 1, i, r) for i, r in enumerate(neg)]
    keyed.sort(key=lambda k: k[:3])
    return [k[3] for k in keyed]


def export_sft(queries: Sequence[dict], path: str | Path) -> int:
    """Write ``{"prompt", "response"}`` JSONL with polarities interleaved.

    ``queries`` are query records carrying at least ``prompt`` and ``label``.
    Returns the number of lines written.
    """
    rows = interleave_polarity(queries)
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            line = {"prompt": r["prompt"], "response": "Yes" if r["label"] else "No"}
            fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    return len(rows)


__all__ = [
    "FACT_TYPES",
    "ROLES",
    "GenerationError",
    "KGError",
    "LabeledFact",
    "RuleInstance",
    "SplitSpec",
    "corrupt_object",
    "export_sft",
    "gen_fact_batch",
    "gen_fol_pairs",
    "gen_rule_instances",
    "gen_syllogism",
    "generate",
    "read_facts",
    "sample_true_atom",
    "split",
    "write_facts",
]
