"""
Talking to a chat-completion server
===================================

The HTTP backend speaks the common chat-completion JSON protocol. Here a
mock transport stands in for the server so the script runs offline; point
``endpoint`` at a real server and drop ``transport`` to use a live model.
The API key, if any, comes from the LOGICHECK_API_KEY environment variable.
"""

import json
import random

import httpx

from logicheck.backends import BackendConfig, answer_queries
from logicheck.forge import gen_fact_batch
from logicheck.kg import synthetic_kg
from logicheck.pipeline import build_queries, result_rows, score

kg = synthetic_kg(500, seed=3)
queries = build_queries(kg, gen_fact_batch(kg, "simple_pair", 20, random.Random(0)))

calls = {"n": 0}


def server(request: httpx.Request) -> httpx.Response:
    # A flaky, agreeable model: rate-limits every fifth call, then says Yes.
    calls["n"] += 1
    if calls["n"] % 5 == 0:
        return httpx.Response(429)
    body = json.loads(request.content)
    assert body["temperature"] == 0
    return httpx.Response(200, json={"choices": [{"message": {"content": "Yes, it is."}}]})


cfg = BackendConfig("http_chat", endpoint="http://localhost:8000/v1/chat/completions",
                    model="llama-2-7b-chat", concurrency=4, backoff=0.01)
answers = answer_queries(cfg, queries, transport=httpx.MockTransport(server))
print("requests sent:", calls["n"], "retries:", sum(a.retries for a in answers))

(row,) = score(result_rows(queries, answers))
print(f"accuracy {row.accuracy:.2f}, negation consistency {row.consistency:.2f}")
