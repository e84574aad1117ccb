"""Hypothesis strategies shared by the property tests."""

from hypothesis import strategies as st

from logicheck.kg import Triplet
from logicheck.logic import And, Atom, Exists, ForAllNeg, Not, Or

names = st.sampled_from(["a", "b", "c", "oceania", "nz", "Ünïcode \"q\""])
relations = st.sampled_from(["r", "/award/award_winner", "contains"])

triplets = st.builds(Triplet, names, relations, names)


def facts(leaves=None, max_leaves=8):
    leaves = leaves or st.builds(Atom, triplets)
    quantified = st.builds(Exists, names, relations, relations, names) | st.builds(
        ForAllNeg, names, relations, relations, names
    )
    return st.recursive(
        leaves | quantified,
        lambda kids: st.builds(Not, kids)
        | st.builds(And, st.lists(kids, min_size=2, max_size=3).map(tuple))
        | st.builds(Or, st.lists(kids, min_size=2, max_size=3).map(tuple)),
        max_leaves=max_leaves,
    )


def propositional(leaves):
    return st.recursive(
        leaves,
        lambda kids: st.builds(Not, kids)
        | st.builds(And, st.lists(kids, min_size=2, max_size=3).map(tuple))
        | st.builds(Or, st.lists(kids, min_size=2, max_size=3).map(tuple)),
        max_leaves=8,
    )
