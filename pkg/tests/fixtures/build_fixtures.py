"""Rebuild the frozen replay fixtures in this directory.

Run once by hand; tests read the JSONL files and never call this script.
The published-row recording reproduces a reported simple-fact result
through indicator counts only: 75 pairs answered correctly on both sides,
one pair wrong on both sides, and 24 pairs given the same answer twice
(12 Yes/Yes, 12 No/No). That yields accuracy 174/200 and negation
consistency 76/100.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from logicheck.context import ContextSpec
from logicheck.forge import LabeledFact, gen_fact_batch, type_rng
from logicheck.kg import KnowledgeGraph, synthetic_kg
from logicheck.logic import atom
from logicheck.pipeline import build_queries, write_jsonl

HERE = Path(__file__).parent


def worked_pairs() -> tuple[KnowledgeGraph, list[LabeledFact]]:
    """The two worked pairs; each false object is another object of the same relation."""
    kg = KnowledgeGraph(
        [
            ("golden_globe_best_director", "honoredFor", "born_on_the_fourth_of_july"),
            ("other_award", "honoredFor", "chamada_a_cobrar"),
            ("vietnam", "capital", "hanoi"),
            ("other_region", "capital", "sorkh_qaleh_north_khorasan"),
        ],
        entity_names={
            "golden_globe_best_director": "Golden Globe Award for Best Director",
            "born_on_the_fourth_of_july": "Born on the Fourth of July",
            "chamada_a_cobrar": "Chamada a Cobrar",
            "vietnam": "Vietnam",
            "hanoi": "Hanoi",
            "sorkh_qaleh_north_khorasan": "Sorkh Qaleh - North Khorasan",
        },
    )
    facts = []
    for g, (s, r, o_true, o_false) in {
        "inconsistent_pair": ("golden_globe_best_director", "honoredFor", "born_on_the_fourth_of_july", "chamada_a_cobrar"),
        "consistent_pair": ("vietnam", "capital", "hanoi", "sorkh_qaleh_north_khorasan"),
    }.items():
        facts.append(LabeledFact(f"{g}/base", atom(s, r, o_true), True, g, "simple_pair", "base"))
        facts.append(LabeledFact(f"{g}/negation", atom(s, r, o_false), False, g, "simple_pair", "negation"))
    return kg, facts


def published_row_pattern(n_groups: int = 100, seed: int = 2024) -> list[tuple[str, str]]:
    pattern = [("Yes", "No")] * 75 + [("No", "Yes")] + [("Yes", "Yes")] * 12 + [("No", "No")] * 12
    assert len(pattern) == n_groups
    random.Random(seed).shuffle(pattern)
    return pattern


def main() -> None:
    kg, facts = worked_pairs()
    queries = build_queries(kg, facts, ContextSpec())
    write_jsonl([q.to_json() for q in queries], HERE / "worked_examples_queries.jsonl")
    answers = {
        "inconsistent_pair_recording.jsonl": {"inconsistent_pair/base": "Yes", "inconsistent_pair/negation": "Yes"},
        "consistent_pair_recording.jsonl": {"consistent_pair/base": "Yes", "consistent_pair/negation": "No"},
    }
    for name, raws in answers.items():
        write_jsonl([{"id": k, "raw": v} for k, v in raws.items()], HERE / name)

    synth = synthetic_kg(1000, seed=3)
    pairs = gen_fact_batch(synth, "simple_pair", 100, type_rng(11, "published_row"))
    queries = build_queries(synth, pairs, ContextSpec())
    write_jsonl([q.to_json() for q in queries], HERE / "published_row_queries.jsonl")
    styles = ["{}", "{}.", "The answer is {}.", "{}, the triplet is in the context."]
    rng = random.Random(7)
    rows = []
    for k, (base, neg) in enumerate(published_row_pattern()):
        g = pairs[2 * k].group
        rows.append({"id": f"{g}/base", "raw": rng.choice(styles).format(base)})
        rows.append({"id": f"{g}/negation", "raw": rng.choice(styles).format(neg)})
    write_jsonl(rows, HERE / "published_row_recording.jsonl")


if __name__ == "__main__":
    main()
