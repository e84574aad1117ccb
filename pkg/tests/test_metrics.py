import math
import random
from pathlib import Path

import pytest

from logicheck.backends import BackendConfig, answer_queries
from logicheck.forge import COMPOUND_TYPES, FACT_TYPES, ROLES, generate
from logicheck.logic import And, Or, atom
from logicheck.metrics import (
    Answered,
    AnsweredGroup,
    MetricError,
    MetricRow,
    accuracy,
    aggregate_report,
    cnf_consistency,
    consistency,
    dnf_consistency,
    group_results,
    metric_rows,
    negation_consistency,
    operator_consistency,
    rule_consistency,
    rule_indicator,
)
from logicheck.pipeline import build_queries, read_queries, result_rows, score

FIXTURES = Path(__file__).parent / "fixtures"
p, q, r = (atom(f"e{i}", "r", "v") for i in range(3))


def pair(base, neg, g="g"):
    return AnsweredGroup(
        g,
        "simple_pair",
        {"base": Answered(f"{g}/b", p, True, base), "negation": Answered(f"{g}/n", q, False, neg)},
    )


def compound(fact, answers, fact_type="conj", g="g"):
    parts = [p, q, r][: len(answers) - 1]
    members = {"compound": Answered(f"{g}/c", fact, True, answers[-1])}
    for i, (a, bit) in enumerate(zip(parts, answers)):
        members[f"constituent:{i}"] = Answered(f"{g}/{i}", a, True, bit)
    return AnsweredGroup(g, fact_type, members)


def rule(fact_type, roles, answers, g="g"):
    return AnsweredGroup(g, fact_type, {k: Answered(f"{g}/{k}", p, True, a) for k, a in zip(roles, answers)})


def test_accuracy_examples():
    g = AnsweredGroup("g", "x", {str(i): Answered(str(i), p, bool(l), 1) for i, l in enumerate([1, 0, 1])})
    assert accuracy([g]) == pytest.approx(2 / 3)
    assert accuracy([pair(1, 0)]) == 1.0


def test_accuracy_empty():
    with pytest.raises(MetricError):
        accuracy([])


def test_accuracy_brute_force():
    rng = random.Random(0)
    groups, labels, answers = [], [], []
    for k in range(500):
        b, n = rng.choice([0, 1, None]), rng.choice([0, 1, None])
        groups.append(pair(b, n, g=str(k)))
        labels += [1, 0]
        answers += [b, n]
    hits = total = 0
    for lab, ans in zip(labels, answers):
        if ans is not None:
            total += 1
            hits += lab == ans
    assert accuracy(groups) == hits / total


def test_negation_examples():
    assert negation_consistency([pair(1, 1)]) == 0
    assert negation_consistency([pair(1, 0)]) == 1
    batch = [pair(1, 0, "a"), pair(1, 1, "b"), pair(0, 1, "c")]
    assert negation_consistency(batch) == pytest.approx(2 / 3)


def test_negation_missing_role():
    g = AnsweredGroup("g", "simple_pair", {"base": Answered("b", p, True, 1)})
    with pytest.raises(MetricError, match="missing role"):
        negation_consistency([g])


def test_accuracy_and_consistency_independent():
    assert accuracy([pair(1, 1)]) == 0.5
    assert negation_consistency([pair(1, 1)]) == 0.0


def test_operator_examples():
    assert operator_consistency([compound(And((p, q)), [1, 1, 1])]) == 1
    assert operator_consistency([compound(And((p, q)), [0, 1, 1])]) == 0
    assert operator_consistency([compound(Or((p, q)), [0, 0, 0], "disj")]) == 1


def test_operator_rejects_nested():
    with pytest.raises(MetricError):
        operator_consistency([compound(Or((p, And((q, r)))), [1, 0, 1, 1], "or_and")])


def test_dnf_examples():
    f = Or((p, And((q, r))))
    assert dnf_consistency([compound(f, [1, 0, 1, 1], "or_and")]) == 1
    assert dnf_consistency([compound(f, [1, 0, 1, 0], "or_and")]) == 0
    assert cnf_consistency([compound(f, [1, 0, 1, 1], "or_and")]) == 1


def test_dnf_structural_mismatch():
    g = compound(Or((p, And((q, r)))), [1, 0, 1], "or_and")
    with pytest.raises(MetricError, match="no constituent answer"):
        dnf_consistency([g])


@pytest.mark.parametrize("fact", [And((p, q)), Or((p, q)), And((p, q, r)), Or((p, q, r))])
def test_dnf_equals_cnf_for_single_operator(fact):
    n = len(fact.children)
    for bits in range(2 ** (n + 1)):
        answers = [(bits >> i) & 1 for i in range(n + 1)]
        g = compound(fact, answers)
        assert dnf_consistency([g]) == cnf_consistency([g])


def test_rule_examples():
    assert rule_consistency([rule("rule_comm_and", ("lhs", "rhs"), (1, 1))]) == 1
    assert rule_consistency([rule("rule_comm_and", ("lhs", "rhs"), (1, 0))]) == 0
    assert rule_consistency([rule("fol_pair", ("exists", "forall_neg"), (1, 0))]) == 1
    assert rule_consistency([rule("fol_pair", ("exists", "forall_neg"), (1, 1))]) == 0


def test_syllogism_modes():
    g = rule("syllogism", ("chain", "entailed"), (0, 1))
    assert rule_indicator(g) == 0
    assert rule_indicator(g, "implies") == 1
    assert rule_indicator(rule("syllogism", ("chain", "entailed"), (1, 0)), "implies") == 0


def test_incomplete_groups_skipped():
    batch = [pair(1, 0, "a"), pair(None, 1, "b")]
    assert negation_consistency(batch) == 1.0
    # accuracy drops only the unparseable query, consistency drops the whole group
    assert accuracy(batch) == pytest.approx(2 / 3)


def test_weighted_mean_property():
    rng = random.Random(3)
    a = [pair(rng.randint(0, 1), rng.randint(0, 1), f"a{i}") for i in range(37)]
    b = [pair(rng.randint(0, 1), rng.randint(0, 1), f"b{i}") for i in range(63)]
    combined = negation_consistency(a + b)
    assert combined == pytest.approx((37 * negation_consistency(a) + 63 * negation_consistency(b)) / 100)
    assert accuracy(a + b) == pytest.approx((74 * accuracy(a) + 126 * accuracy(b)) / 200)


def test_group_results_validates_roles():
    rows = [{"id": "g/base", "fact": p, "label": True, "group": "g", "fact_type": "simple_pair", "role": "base", "parsed": 1}]
    with pytest.raises(MetricError, match="do not match"):
        group_results(rows)
    assert len(group_results(rows, strict=False)) == 1
    with pytest.raises(MetricError, match="duplicate"):
        group_results(rows * 2, strict=False)


def test_consistency_needs_one_type():
    with pytest.raises(MetricError):
        consistency([pair(1, 0), rule("rule_comm_or", ("lhs", "rhs"), (1, 1))])


@pytest.fixture(scope="module")
def benchmark_queries():
    from logicheck.kg import synthetic_kg

    kg = synthetic_kg(1000, seed=3)
    return build_queries(kg, generate(kg, FACT_TYPES, 25, seed=9))


@pytest.mark.parametrize("bit", [0, 1])
def test_constant_responder_identities(benchmark_queries, bit):
    results = result_rows(benchmark_queries, answer_queries(BackendConfig("constant", bit=bit), benchmark_queries))
    rows = {row.fact_type: row for row in score(results)}
    assert rows["conj"].consistency == 1.0
    assert rows["disj"].consistency == 1.0
    assert rows["simple_pair"].consistency == 0.0


def test_oracle_is_fully_consistent(benchmark_queries):
    results = result_rows(benchmark_queries, answer_queries(BackendConfig("oracle"), benchmark_queries))
    for row in score(results):
        assert (row.fact_type, row.accuracy, row.consistency) == (row.fact_type, 1.0, 1.0)
    assert {row.fact_type for row in score(results)} == set(FACT_TYPES)


def test_published_row_replay():
    queries = read_queries(FIXTURES / "published_row_queries.jsonl")
    cfg = BackendConfig("record_replay", path=str(FIXTURES / "published_row_recording.jsonl"))
    (row,) = score(result_rows(queries, answer_queries(cfg, queries)), dataset="FreebaseLFC")
    assert (row.n, row.accuracy, row.consistency) == (100, 0.87, 0.76)
    md, _ = aggregate_report([row])
    assert "| 0.87 | 0.76 |" in md


def test_report_rounding():
    md, csv_text = aggregate_report([MetricRow("d", "simple_pair", 10, 0.876, 0.762, 0)])
    assert "| 0.88 | 0.76 |" in md
    assert "0.876,0.762" in csv_text
    assert csv_text.splitlines()[0] == "dataset,fact_type,n,accuracy,consistency,unparseable"


def test_report_omits_empty_types():
    md, csv_text = aggregate_report(
        [MetricRow("d", "conj", 0, math.nan, math.nan, 0), MetricRow("d", "disj", 4, 1.0, 1.0, 0)]
    )
    assert "conj" not in md and "conj" not in csv_text
    with pytest.raises(MetricError):
        aggregate_report([])


def test_report_groups_by_dataset():
    rows = [
        MetricRow("a", "conj", 1, 1.0, 1.0, 0),
        MetricRow("b", "conj", 1, 0.5, 0.0, 0),
        MetricRow("a", "disj", 1, 1.0, 1.0, 0),
    ]
    _, csv_text = aggregate_report(rows)
    assert [line.split(",")[:2] for line in csv_text.splitlines()[1:]] == [
        ["a", "conj"], ["a", "disj"], ["b", "conj"],
    ]


def test_metric_rows_order_and_nan():
    groups = [pair(None, None, "x"), rule("rule_comm_or", ("lhs", "rhs"), (1, 1), "y")]
    rows = metric_rows(groups, "d")
    assert [r.fact_type for r in rows] == ["simple_pair", "rule_comm_or"]
    assert math.isnan(rows[0].accuracy) and rows[0].unparseable == 2
