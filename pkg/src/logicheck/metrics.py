"""Accuracy and logical-consistency measures over answered query groups."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .forge import COMPOUND_TYPES, FACT_TYPES, ROLES, RULE_TYPES
from .kg import Triplet
from .logic import Atom, Fact, NormalForm, fact_from_obj, to_cnf, to_dnf


class MetricError(ValueError):
    pass


FACT_FORMS = {
    "simple_pair": "p, ¬p",
    "conj": "p ∧ q",
    "disj": "p ∨ q",
    "or_and": "p ∨ (q ∧ r)",
    "and_or": "p ∧ (q ∨ r)",
    "rule_comm_or": "p ∨ q ↔ q ∨ p",
    "rule_comm_and": "p ∧ q ↔ q ∧ p",
    "rule_assoc_or": "(p ∨ q) ∨ s ↔ p ∨ (q ∨ s)",
    "rule_assoc_and": "(p ∧ q) ∧ s ↔ p ∧ (q ∧ s)",
    "rule_dist_1": "p ∧ (q ∨ s) ↔ (p ∧ q) ∨ (p ∧ s)",
    "rule_dist_2": "p ∨ (q ∧ s) ↔ (p ∨ q) ∧ (p ∨ s)",
    "demorgan_or": "¬(p ∨ q) ↔ ¬p ∧ ¬q",
    "demorgan_and": "¬(p ∧ q) ↔ ¬p ∨ ¬q",
    "fol_pair": "FoL",
    "syllogism": "LoS",
}


@dataclass
class Answered:
    id: str
    fact: Fact
    label: bool
    answer: int | None  # None when the response was unparseable or failed


@dataclass
class AnsweredGroup:
    group: str
    fact_type: str
    members: dict[str, Answered] = field(default_factory=dict)

    def answer(self, role: str) -> int:
        try:
            a = self.members[role].answer
        except KeyError:
            raise MetricError(f"group {self.group}: missing role {role!r}") from None
        if a is None:
            raise MetricError(f"group {self.group}: role {role!r} has no parsed answer")
        return a

    @property
    def complete(self) -> bool:
        return all(m.answer is not None for m in self.members.values())


def group_results(rows: Iterable[dict], strict: bool = True) -> list[AnsweredGroup]:
    """Assemble result rows (query JSON plus ``parsed``) into groups, first-seen order."""
    groups: dict[str, AnsweredGroup] = {}
    for row in rows:
        fact = row["fact"] if not isinstance(row["fact"], dict) else fact_from_obj(row["fact"])
        g = groups.setdefault(row["group"], AnsweredGroup(row["group"], row["fact_type"]))
        if g.fact_type != row["fact_type"]:
            raise MetricError(f"group {g.group} mixes fact types")
        if row["role"] in g.members:
            raise MetricError(f"group {g.group}: duplicate role {row['role']!r}")
        g.members[row["role"]] = Answered(row["id"], fact, bool(row["label"]), row.get("parsed"))
    if strict:
        for g in groups.values():
            want = ROLES.get(g.fact_type)
            if want is not None and set(g.members) != set(want):
                raise MetricError(
                    f"group {g.group}: roles {sorted(g.members)} do not match {g.fact_type}"
                )
    return list(groups.values())


def _mean(xs: Sequence[int]) -> float:
    if not xs:
        raise MetricError("empty batch")
    return sum(xs) / len(xs)


def accuracy(groups: Sequence[AnsweredGroup]) -> float:
    """Fraction of parsed member answers equal to the ground-truth label."""
    hits = [
        int(m.answer == int(m.label))
        for g in groups
        for m in g.members.values()
        if m.answer is not None
    ]
    return _mean(hits)


def unparseable_count(groups: Sequence[AnsweredGroup]) -> int:
    return sum(m.answer is None for g in groups for m in g.members.values())


# -- per-group indicators --------------------------------------------------


def negation_indicator(g: AnsweredGroup) -> int:
    return int(g.answer("base") == 1 - g.answer("negation"))


def _constituent_answers(g: AnsweredGroup) -> dict[Triplet, int]:
    out = {}
    for role, m in g.members.items():
        if role.startswith("constituent:"):
            if not isinstance(m.fact, Atom):
                raise MetricError(f"group {g.group}: constituent {role} is not atomic")
            out[m.fact.triplet] = g.answer(role)
    return out


def normal_form_indicator(g: AnsweredGroup, form: NormalForm) -> int:
    answers = _constituent_answers(g)
    for t, _ in form.literals():
        if t not in answers:
            raise MetricError(f"group {g.group}: no constituent answer for {t}")
    folded = form.evaluate(lambda t: bool(answers[t]))
    return int(g.answer("compound") == int(folded))


def dnf_indicator(g: AnsweredGroup) -> int:
    return normal_form_indicator(g, to_dnf(g.members["compound"].fact))


def cnf_indicator(g: AnsweredGroup) -> int:
    return normal_form_indicator(g, to_cnf(g.members["compound"].fact))


def rule_indicator(g: AnsweredGroup, syllogism_mode: str = "equal") -> int:
    if g.fact_type == "fol_pair":
        return int(g.answer("exists") == 1 - g.answer("forall_neg"))
    if g.fact_type == "syllogism":
        chain, entailed = g.answer("chain"), g.answer("entailed")
        if syllogism_mode == "implies":
            return int(not chain or bool(entailed))
        return int(chain == entailed)
    return int(g.answer("lhs") == g.answer("rhs"))


def _batch(groups, indicator) -> float:
    return _mean([indicator(g) for g in groups if g.complete])


def negation_consistency(groups: Sequence[AnsweredGroup]) -> float:
    return _batch(groups, negation_indicator)


def operator_consistency(groups: Sequence[AnsweredGroup]) -> float:
    """LLM(p op q) == LLM(p) op LLM(q) for single-operator compounds."""
    for g in groups:
        fact = g.members["compound"].fact
        if any(not isinstance(c, Atom) for c in getattr(fact, "children", (None,))):
            raise MetricError(f"group {g.group}: not a single-operator compound")
    return _batch(groups, dnf_indicator)


def dnf_consistency(groups: Sequence[AnsweredGroup]) -> float:
    return _batch(groups, dnf_indicator)


def cnf_consistency(groups: Sequence[AnsweredGroup]) -> float:
    return _batch(groups, cnf_indicator)


def rule_consistency(groups: Sequence[AnsweredGroup], syllogism_mode: str = "equal") -> float:
    return _batch(groups, lambda g: rule_indicator(g, syllogism_mode))


def consistency(groups: Sequence[AnsweredGroup], syllogism_mode: str = "equal") -> float:
    """Consistency for a batch of one fact type; groups with a missing answer are skipped."""
    types = {g.fact_type for g in groups}
    if len(types) != 1:
        raise MetricError(f"expected one fact type, got {sorted(types)}")
    (ft,) = types
    if ft == "simple_pair":
        return negation_consistency(groups)
    if ft in COMPOUND_TYPES:
        return dnf_consistency(groups)
    if ft in RULE_TYPES or ft in ("fol_pair", "syllogism"):
        return rule_consistency(groups, syllogism_mode)
    raise MetricError(f"no consistency measure for {ft!r}")


# -- reporting -------------------------------------------------------------


@dataclass
class MetricRow:
    dataset: str
    fact_type: str
    n: int
    accuracy: float
    consistency: float
    unparseable: int


def metric_rows(
    groups: Sequence[AnsweredGroup], dataset: str, syllogism_mode: str = "equal"
) -> list[MetricRow]:
    by_type: dict[str, list[AnsweredGroup]] = {}
    for g in groups:
        by_type.setdefault(g.fact_type, []).append(g)
    order = {ft: i for i, ft in enumerate(FACT_TYPES)}
    rows = []
    for ft in sorted(by_type, key=lambda t: (order.get(t, len(order)), t)):
        gs = by_type[ft]
        try:
            acc = accuracy(gs)
        except MetricError:
            acc = math.nan
        try:
            cons = consistency(gs, syllogism_mode)
        except MetricError:
            cons = math.nan
        rows.append(MetricRow(dataset, ft, len(gs), acc, cons, unparseable_count(gs)))
    return rows


def _fmt(x: float) -> str:
    return "n/a" if math.isnan(x) else f"{x:.2f}"


def aggregate_report(rows: Iterable[MetricRow]) -> tuple[str, str]:
    """Markdown table (2 decimals) and full-precision CSV, grouped by dataset."""
    rows = [r for r in rows if r.n > 0]
    if not rows:
        raise MetricError("no metric rows")
    datasets = list(dict.fromkeys(r.dataset for r in rows))
    ordered = [r for d in datasets for r in rows if r.dataset == d]

    md = [
        "| dataset | fact_type | fact | n | accuracy | consistency | unparseable |",
        "|---|---|---|---:|---:|---:|---:|",
    ]
    for r in ordered:
        md.append(
            f"| {r.dataset} | {r.fact_type} | {FACT_FORMS.get(r.fact_type, r.fact_type)} "
            f"| {r.n} | {_fmt(r.accuracy)} | {_fmt(r.consistency)} | {r.unparseable} |"
        )

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "fact_type", "n", "accuracy", "consistency", "unparseable"])
    for r in ordered:
        w.writerow([r.dataset, r.fact_type, r.n, repr(r.accuracy), repr(r.consistency), r.unparseable])
    return "\n".join(md) + "\n", buf.getvalue()
