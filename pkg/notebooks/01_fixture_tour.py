"""
A tour of the fixture graph
===========================

Five triples, two continents. Enough to see truth, negation by corruption,
bounded neighbourhoods and normal forms in one sitting.
"""

import random

from logicheck import And, Exists, Not, Or, evaluate_truth, fixture_kg, to_cnf, to_dnf
from logicheck.forge import corrupt_object
from logicheck.logic import atom

kg = fixture_kg()
print(kg)
for t in kg:
    print("  ", t)

# Truth is closed-world membership. Unknown triples over known ids are false.
p = atom("oceania", "contains", "nz")
print("T(p) =", evaluate_truth(kg, p))
print("T(oceania contains paris) =", evaluate_truth(kg, atom("oceania", "contains", "paris")))

# The benchmark negates a fact by swapping its object for one the relation
# uses elsewhere, so the false fact still looks plausible.
not_p = corrupt_object(kg, p, random.Random(0))
print("corrupted:", not_p.triplet, "->", evaluate_truth(kg, not_p))

# Two-hop neighbourhood of oceania, undirected, with hop distances.
sub = kg.bounded_bfs("oceania", 2)
print("hops:", sub.hop_of)
for t in sub.triples:
    print("  ", t)

# Quantified two-hop facts.
print("exists x: contains(oceania, x) and country(x, auckland) =",
      evaluate_truth(kg, Exists("oceania", "contains", "country", "auckland")))

# Normal forms are clause lists of (triplet, negated) literals.
q = atom("nz", "country", "auckland")
r = atom("europe", "contains", "france")
f = Not(And((p, Or((q, r)))))


def show(nf, inner, outer):
    lit = lambda t, neg: ("not " if neg else "") + f"{t.relation}({t.subject}, {t.object})"  # noqa: E731
    return f" {outer} ".join("(" + f" {inner} ".join(lit(*l) for l in c) + ")" for c in nf.clauses)


print("DNF:", show(to_dnf(f), "and", "or"))
print("CNF:", show(to_cnf(f), "or", "and"))
