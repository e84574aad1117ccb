"""
Consistency under local responders
==================================

Three answer sources with known behaviour. The oracle reads the context and
is perfect. A noisy oracle flips a fraction of answers. A constant responder
is always consistent on conjunctions and disjunctions yet never on negation.
"""

import numpy as np

from logicheck.backends import BackendConfig
from logicheck.forge import generate
from logicheck.kg import synthetic_kg
from logicheck.metrics import aggregate_report
from logicheck.pipeline import build_queries, evaluate_queries, score

kg = synthetic_kg(1000, seed=1)
facts = generate(kg, ["simple_pair", "conj", "disj", "or_and", "demorgan_and", "fol_pair"], 100, seed=1)
queries = build_queries(kg, facts)

for name, cfg in [
    ("oracle", BackendConfig("oracle")),
    ("noisy eps=0.1", BackendConfig("noisy_oracle", epsilon=0.1, seed=0)),
    ("always yes", BackendConfig("constant", bit=1)),
]:
    rows = score(evaluate_queries(queries, cfg), dataset=name)
    md, _ = aggregate_report(rows)
    print(md)

# With independent flips at rate eps, a pair stays consistent when neither or
# both answers flip, so expected negation consistency is (1-eps)^2 + eps^2.
eps = 0.1
print("expected negation consistency:", (1 - eps) ** 2 + eps**2)
sims = []
for seed in range(20):
    rows = score(evaluate_queries(queries, BackendConfig("noisy_oracle", epsilon=eps, seed=seed)))
    sims.append(next(r.consistency for r in rows if r.fact_type == "simple_pair"))
print("observed mean over 20 seeds:", np.mean(sims))
