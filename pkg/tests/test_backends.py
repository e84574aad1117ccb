import asyncio
import json
import random
from pathlib import Path

import httpx
import numpy as np
import pytest

from logicheck.backends import (
    API_KEY_ENV,
    AnswerRecord,
    BackendConfig,
    BackendError,
    answer_queries,
    chat_payload,
    http_query_batch,
    noisy_answer,
    oracle_answer,
    query_rng,
    record,
    replay,
)
from logicheck.context import Context, ContextSpec, build_context
from logicheck.forge import gen_fact_batch
from logicheck.kg import Triplet
from logicheck.logic import And, Exists, ForAllNeg, Not, Or, atom
from logicheck.pipeline import build_queries, read_queries, result_rows, score
from logicheck.prompts import PromptTemplate

FIXTURES = Path(__file__).parent / "fixtures"
P = atom("oceania", "contains", "nz")
BAD = atom("oceania", "contains", "france")


@pytest.fixture
def ctx(kg):
    return build_context(kg, P, ContextSpec())


@pytest.fixture(scope="module")
def simple_queries():
    from logicheck.kg import synthetic_kg

    kg = synthetic_kg(1000, seed=3)
    facts = gen_fact_batch(kg, "simple_pair", 500, random.Random(1))
    return build_queries(kg, facts)


def test_oracle_membership(ctx):
    assert oracle_answer(ctx, P) == 1
    assert oracle_answer(ctx, BAD) == 0
    assert oracle_answer(ctx, And((P, BAD))) == 0
    assert oracle_answer(ctx, Or((P, BAD))) == 1
    assert oracle_answer(ctx, Not(BAD)) == 1


def test_oracle_quantifiers(ctx):
    assert oracle_answer(ctx, Exists("oceania", "contains", "country", "auckland")) == 1
    assert oracle_answer(ctx, ForAllNeg("oceania", "contains", "country", "auckland")) == 0
    assert oracle_answer(Context(), Exists("oceania", "contains", "country", "auckland")) == 0


def test_noisy_boundaries(simple_queries):
    for q in simple_queries:
        oracle = oracle_answer(q.context, q.fact)
        assert noisy_answer(q.context, q.fact, 0.0, query_rng(0, q.id)) == oracle
        assert noisy_answer(q.context, q.fact, 1.0, query_rng(0, q.id)) == 1 - oracle


def test_noisy_is_order_independent(simple_queries):
    cfg = BackendConfig("noisy_oracle", epsilon=0.3, seed=4)
    fwd = answer_queries(cfg, simple_queries)
    rev = answer_queries(cfg, simple_queries[::-1])[::-1]
    assert [a.parsed for a in fwd] == [a.parsed for a in rev]


def test_noisy_rate(simple_queries):
    cfg = BackendConfig("noisy_oracle", epsilon=0.1, seed=1)
    answers = answer_queries(cfg, simple_queries)
    acc = np.mean([a.parsed == int(q.label) for q, a in zip(simple_queries, answers)])
    assert abs(acc - 0.9) <= 0.045  # 1000 queries; the 5000-query check lives in the acceptance suite


def test_constant_backend(simple_queries):
    out = answer_queries(BackendConfig("constant", bit=0), simple_queries[:4])
    assert [a.raw for a in out] == ["No"] * 4
    assert [a.parsed for a in out] == [0] * 4


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "gpt"},
        {"kind": "http_chat"},
        {"kind": "http_chat", "endpoint": "http://x", "temperature": 0.7},
        {"kind": "noisy_oracle", "epsilon": 1.5},
        {"kind": "constant", "bit": 2},
        {"kind": "record_replay"},
        {"kind": "oracle", "concurrency": 0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(BackendError):
        BackendConfig(**kwargs)


def test_chat_payload_splits_system():
    prompt = PromptTemplate().render("c", "f")
    body = chat_payload(prompt, "m")
    assert body["temperature"] == 0.0
    assert [m["role"] for m in body["messages"]] == ["system", "user"]
    assert body["messages"][1]["content"].startswith("Consider the context")
    assert [m["role"] for m in chat_payload("plain", "m")["messages"]] == ["user"]


def reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def http_config(**kw):
    base = dict(kind="http_chat", endpoint="http://llm.test/v1/chat/completions", model="m", backoff=0.0)
    base.update(kw)
    return BackendConfig(**base)


def test_http_happy_path_keeps_order():
    async def handler(request):
        body = json.loads(request.content)
        n = int(body["messages"][-1]["content"].split()[-1])
        await asyncio.sleep(0.001 * ((7 * n) % 5))
        return reply("Yes" if n % 2 == 0 else "No")

    prompts = [f"question {i}" for i in range(40)]
    out = http_query_batch(http_config(), prompts, transport=httpx.MockTransport(handler))
    assert [a.query_id for a in out] == [str(i) for i in range(40)]
    assert [a.parsed for a in out] == [int(i % 2 == 0) for i in range(40)]


def test_http_retries_429(caplog):
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(429) if len(calls) <= 2 else reply("Yes")

    caplog.set_level("INFO")
    (rec,) = http_query_batch(http_config(), ["q"], transport=httpx.MockTransport(handler))
    assert (rec.parsed, rec.retries, rec.error) == (1, 2, None)
    assert "after 2 retries" in caplog.text


def test_http_retries_exhausted():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(503)

    (rec,) = http_query_batch(http_config(max_retries=3), ["q"], transport=httpx.MockTransport(handler))
    assert rec.parsed is None and rec.error == "http 503"
    assert len(calls) == 4


def test_http_client_error_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400)

    (rec,) = http_query_batch(http_config(), ["q"], transport=httpx.MockTransport(handler))
    assert rec.error == "http 400" and len(calls) == 1


def test_http_timeout():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ReadTimeout("slow", request=request)

    (rec,) = http_query_batch(http_config(max_retries=2), ["q"], transport=httpx.MockTransport(handler))
    assert rec.parsed is None and rec.error.startswith("transport")
    assert rec.retries == 2 and len(calls) == 3


@pytest.mark.parametrize("body", [{"choices": []}, {"foo": 1}, {"choices": [{"message": {"content": 3}}]}])
def test_http_malformed_body(body):
    transport = httpx.MockTransport(lambda r: httpx.Response(200, json=body))
    (rec,) = http_query_batch(http_config(), ["q"], transport=transport)
    assert rec.parsed is None and rec.error.startswith("protocol")


def test_http_unparseable_content():
    (rec,) = http_query_batch(http_config(), ["q"], transport=httpx.MockTransport(lambda r: reply("maybe")))
    assert rec.raw == "maybe" and rec.parsed is None and rec.error == "unparseable"


def test_http_concurrency_bound():
    state = {"now": 0, "peak": 0}

    async def handler(request):
        state["now"] += 1
        state["peak"] = max(state["peak"], state["now"])
        await asyncio.sleep(0.005)
        state["now"] -= 1
        return reply("No")

    out = http_query_batch(http_config(concurrency=3), ["q"] * 20, transport=httpx.MockTransport(handler))
    assert all(a.parsed == 0 for a in out)
    assert 1 < state["peak"] <= 3


def test_http_auth_header(monkeypatch):
    seen = []

    def handler(request):
        seen.append(request.headers.get("authorization"))
        return reply("Yes")

    monkeypatch.setenv(API_KEY_ENV, "sk-test")
    http_query_batch(http_config(), ["q"], transport=httpx.MockTransport(handler))
    monkeypatch.delenv(API_KEY_ENV)
    http_query_batch(http_config(), ["q"], transport=httpx.MockTransport(handler))
    assert seen == ["Bearer sk-test", None]


def test_record_replay_roundtrip(simple_queries, tmp_path):
    queries = simple_queries[:50]
    answers = answer_queries(BackendConfig("noisy_oracle", epsilon=0.2), queries)
    path = tmp_path / "rec.jsonl"
    record(answers, path)
    back = answer_queries(BackendConfig("record_replay", path=str(path)), queries)
    assert [(a.raw, a.parsed) for a in back] == [(a.raw, a.parsed) for a in answers]
    assert score(result_rows(queries, back)) == score(result_rows(queries, answers))


def test_replay_missing_id(tmp_path):
    path = tmp_path / "rec.jsonl"
    record([AnswerRecord.from_raw("a", "Yes")], path)
    with pytest.raises(BackendError, match="lacks 1 ids"):
        replay(path, ["a", "b"])


def test_replay_bad_line(tmp_path):
    path = tmp_path / "rec.jsonl"
    path.write_text('{"id": "a"}\n')
    with pytest.raises(BackendError, match=":1:"):
        replay(path, ["a"])


def worked_group(name):
    queries = [q for q in read_queries(FIXTURES / "worked_examples_queries.jsonl") if q.group == name]
    cfg = BackendConfig("record_replay", path=str(FIXTURES / f"{name}_recording.jsonl"))
    (row,) = score(result_rows(queries, answer_queries(cfg, queries)))
    return row


def test_inconsistent_pair_recording():
    row = worked_group("inconsistent_pair")
    assert (row.accuracy, row.consistency) == (0.5, 0.0)


def test_consistent_pair_recording():
    row = worked_group("consistent_pair")
    assert (row.accuracy, row.consistency) == (1.0, 1.0)
