"""
Retrieval strategies and budgets
================================

The same fact under BFS with relation similarity, BFS with embeddings, and
embedding search over the whole graph, at the 200 and 1000 token budgets.
"""

from logicheck.context import ContextSpec, TripleIndex, build_context, relation_similarity
from logicheck.kg import synthetic_kg
from logicheck.logic import And, atom

kg = synthetic_kg(1000, seed=2)
# Relations sharing a leading path segment score 0.5, unrelated ones 0.
a, b, c = "/film/film_rel1", "/film/film_rel7", "/award/award_rel2"
print(relation_similarity(a, b), relation_similarity(a, c))

t, u = kg.triple(10), kg.triple(500)
fact = And((atom(*t), atom(*u)))
index = TripleIndex(kg)

for strategy in ("bfs_hierarchy", "bfs_embed", "embed_full"):
    for budget in (200, 1000):
        ctx = build_context(kg, fact, ContextSpec(strategy=strategy, token_budget=budget), index=index)
        print(f"{strategy:14s} budget={budget:4d} lines={len(ctx.triples):3d} tokens={ctx.token_count}")

# Each atom gets half the budget; the lists are interleaved, gold first.
ctx = build_context(kg, fact, ContextSpec(token_budget=60))
print(ctx.rendered)
