"""Exhaustive small-formula enumeration and a bitmask truth-table oracle."""

from functools import lru_cache

from logicheck.kg import Triplet
from logicheck.logic import And, Atom, Not, Or

ATOMS = tuple(Atom(Triplet(f"e{i}", "r", "v")) for i in range(4))
# truth table of atom i over the 16 assignments: bit k of the mask is its value under assignment k
MASKS = {a.triplet: sum(1 << k for k in range(16) if (k >> i) & 1) for i, a in enumerate(ATOMS)}
FULL = (1 << 16) - 1


@lru_cache(maxsize=None)
def formulas(depth: int, leaves: int) -> tuple:
    """Every formula of depth <= ``depth`` with exactly ``leaves`` atom occurrences."""
    if depth < 0:
        return ()
    out = list(ATOMS) if leaves == 1 else []
    if depth >= 1:
        out.extend(Not(f) for f in formulas(depth - 1, leaves))
        for k in range(1, leaves):
            for a in formulas(depth - 1, k):
                for b in formulas(depth - 1, leaves - k):
                    out.append(And((a, b)))
                    out.append(Or((a, b)))
    return tuple(out)


def all_formulas(depth: int = 3, max_leaves: int = 4):
    for k in range(1, max_leaves + 1):
        yield from formulas(depth, k)


def table(f) -> int:
    if isinstance(f, Atom):
        return MASKS[f.triplet]
    if isinstance(f, Not):
        return FULL ^ table(f.child)
    if isinstance(f, And):
        m = FULL
        for c in f.children:
            m &= table(c)
        return m
    m = 0
    for c in f.children:
        m |= table(c)
    return m


def lit_mask(lit) -> int:
    t, neg = lit
    return FULL ^ MASKS[t] if neg else MASKS[t]


def nf_table(nf) -> int:
    if nf.kind == "DNF":
        m = 0
        for clause in nf.clauses:
            c = FULL
            for lit in clause:
                c &= lit_mask(lit)
            m |= c
        return m
    m = FULL
    for clause in nf.clauses:
        c = 0
        for lit in clause:
            c |= lit_mask(lit)
        m &= c
    return m
