"""
Building a benchmark
====================

Generate every fact type over a synthetic graph, split by group, retrieve
contexts, render prompts and export an instruction-tuning file.
"""

import tempfile
from collections import Counter
from pathlib import Path

from logicheck.forge import FACT_TYPES, SplitSpec, export_sft, generate, split
from logicheck.kg import synthetic_kg
from logicheck.pipeline import build_queries

kg = synthetic_kg(1000, seed=0)
facts = generate(kg, FACT_TYPES, 40, seed=0)
print(len(facts), "facts")
print(Counter(f.fact_type for f in facts))

# A group holds a fact together with its partners (negation, constituents,
# the other side of a law). Splits move whole groups.
train, evals, test = split(facts, SplitSpec(20, 10, 10, seed=0))
print("split sizes:", len(train), len(evals), len(test))

# Contexts come from a two-hop neighbourhood ranked by relation similarity,
# with the queried triple forced in when it is true.
queries = build_queries(kg, train)
q = next(q for q in queries if q.fact_type == "or_and" and q.role == "compound")
print(q.fact_text)
print(q.context.token_count, "context tokens")
print(q.prompt[:600])

# Alternating polarities keep both answers present in every small batch.
out = Path(tempfile.mkdtemp()) / "sft.jsonl"
n = export_sft([x.to_json() for x in queries], out)
print(n, "SFT examples in", out)
print(out.read_text().splitlines()[0][:200])
