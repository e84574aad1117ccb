"""Answer sources: chat-completion HTTP services and deterministic local responders."""

from __future__ import annotations

import asyncio
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import httpx
import numpy as np

from .context import Context, context_contains
from .forge import derived_seed
from .logic import Fact, evaluate, two_hop_witnesses
from .prompts import QueryRecord, Unparseable, parse_response, split_chat_markers

log = logging.getLogger(__name__)

API_KEY_ENV = "LOGICHECK_API_KEY"
BACKEND_KINDS = ("http_chat", "oracle", "noisy_oracle", "constant", "record_replay")
RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "oracle"
    endpoint: str | None = None
    model: str | None = None
    temperature: float = 0.0
    max_retries: int = 3
    concurrency: int = 8
    timeout: float = 60.0
    backoff: float = 0.5
    epsilon: float = 0.0
    bit: int = 1
    path: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise BackendError(f"unknown backend {self.kind!r}")
        if self.kind == "http_chat":
            if self.temperature != 0:
                raise BackendError("http_chat runs at temperature 0")
            if not self.endpoint:
                raise BackendError("http_chat needs an endpoint")
        if not 0.0 <= self.epsilon <= 1.0:
            raise BackendError("epsilon must lie in [0, 1]")
        if self.bit not in (0, 1):
            raise BackendError("constant bit must be 0 or 1")
        if self.concurrency < 1:
            raise BackendError("concurrency must be positive")
        if self.kind == "record_replay" and not self.path:
            raise BackendError("record_replay needs a recording path")


@dataclass
class AnswerRecord:
    query_id: str
    raw: str | None
    parsed: int | None
    latency_ms: float = 0.0
    error: str | None = None
    retries: int = 0

    @classmethod
    def from_raw(cls, query_id: str, raw: str, latency_ms: float = 0.0, retries: int = 0):
        try:
            return cls(query_id, raw, parse_response(raw), latency_ms, None, retries)
        except Unparseable:
            return cls(query_id, raw, None, latency_ms, "unparseable", retries)


def _yes_no(bit: int | bool) -> str:
    return "Yes" if bit else "No"


# -- local responders ------------------------------------------------------


def oracle_answer(context: Context, fact: Fact) -> int:
    """Answer by membership in the context, folded through the logical operators."""
    member = context_contains(context)
    objects: dict[tuple[str, str], list[str]] = {}
    for s, r, o in context.triples:
        objects.setdefault((s, r), []).append(o)

    def exists(s, r1, r2, o):
        return bool(two_hop_witnesses(member, lambda a, b: objects.get((a, b), ()), s, r1, r2, o))

    return int(evaluate(fact, member, exists))


def noisy_answer(context: Context, fact: Fact, epsilon: float, rng: np.random.Generator) -> int:
    bit = oracle_answer(context, fact)
    return 1 - bit if rng.random() < epsilon else bit


def query_rng(seed: int, query_id: str) -> np.random.Generator:
    """Per-query stream so batch order and parallelism cannot change outcomes."""
    return np.random.default_rng(derived_seed(seed, query_id))


def _local_answers(config: BackendConfig, queries: Sequence[QueryRecord]) -> list[AnswerRecord]:
    """Local responders report zero latency so seeded runs stay byte-identical."""
    out = []
    for q in queries:
        if config.kind == "oracle":
            bit = oracle_answer(q.context, q.fact)
        elif config.kind == "noisy_oracle":
            bit = noisy_answer(q.context, q.fact, config.epsilon, query_rng(config.seed, q.id))
        else:
            bit = config.bit
        out.append(AnswerRecord.from_raw(q.id, _yes_no(bit)))
    return out


# -- recording / replay ----------------------------------------------------


def record(answers: Iterable[AnswerRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in answers:
            if a.raw is not None:
                fh.write(json.dumps({"id": a.query_id, "raw": a.raw}, ensure_ascii=False) + "\n")


def replay(path: str | Path, query_ids: Sequence[str]) -> list[AnswerRecord]:
    raws: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "id" not in obj or not isinstance(obj.get("raw"), str):
                raise BackendError(f"{path}:{lineno}: recording lines need 'id' and 'raw'")
            raws[obj["id"]] = obj["raw"]
    missing = [q for q in query_ids if q not in raws]
    if missing:
        raise BackendError(f"recording {path} lacks {len(missing)} ids, e.g. {missing[0]!r}")
    return [AnswerRecord.from_raw(q, raws[q]) for q in query_ids]


# -- HTTP chat -------------------------------------------------------------


def chat_payload(prompt: str, model: str | None, temperature: float = 0.0) -> dict:
    system, user = split_chat_markers(prompt)
    messages = []
    if system is not None:
        messages.append({"role": "system", "content": system})
    messages.append({"role": "user", "content": user})
    return {"model": model, "messages": messages, "temperature": temperature}


async def _post_one(
    client: httpx.AsyncClient,
    sem: asyncio.Semaphore,
    config: BackendConfig,
    query_id: str,
    prompt: str,
    headers: dict,
) -> AnswerRecord:
    payload = chat_payload(prompt, config.model, config.temperature)
    retries = 0
    last_error = "no attempt made"
    t0 = time.perf_counter()
    while True:
        async with sem:
            try:
                resp = await client.post(config.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                resp = None
                last_error = f"transport: {type(exc).__name__}"
        if resp is not None:
            if resp.status_code == 200:
                try:
                    content = resp.json()["choices"][0]["message"]["content"]
                    if not isinstance(content, str):
                        raise TypeError("content is not a string")
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    return AnswerRecord(
                        query_id, None, None, (time.perf_counter() - t0) * 1e3,
                        f"protocol: {exc}", retries,
                    )
                if retries:
                    log.info("%s: succeeded after %d retries", query_id, retries)
                return AnswerRecord.from_raw(
                    query_id, content, (time.perf_counter() - t0) * 1e3, retries
                )
            last_error = f"http {resp.status_code}"
            if resp.status_code not in RETRYABLE_STATUS:
                break
        if retries >= config.max_retries:
            break
        await asyncio.sleep(config.backoff * (2**retries))
        retries += 1
    log.warning("%s: giving up after %d retries (%s)", query_id, retries, last_error)
    return AnswerRecord(
        query_id, None, None, (time.perf_counter() - t0) * 1e3, last_error, retries
    )


async def _query_batch_async(config, ids, prompts, transport) -> list[AnswerRecord]:
    headers = {}
    key = os.environ.get(API_KEY_ENV)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    sem = asyncio.Semaphore(config.concurrency)
    limits = httpx.Limits(max_connections=config.concurrency)
    async with httpx.AsyncClient(
        timeout=config.timeout, limits=limits, transport=transport
    ) as client:
        tasks = [_post_one(client, sem, config, i, p, headers) for i, p in zip(ids, prompts)]
        return list(await asyncio.gather(*tasks))


def http_query_batch(
    config: BackendConfig,
    prompts: Sequence[str],
    ids: Sequence[str] | None = None,
    transport: httpx.AsyncBaseTransport | None = None,
) -> list[AnswerRecord]:
    """POST every prompt with at most ``config.concurrency`` requests in flight.

    Results come back in input order. 429 and 5xx responses and transport
    failures are retried with exponential backoff; what still fails is
    returned as a record with ``error`` set.
    """
    if ids is None:
        ids = [str(i) for i in range(len(prompts))]
    if len(ids) != len(prompts):
        raise ValueError("ids and prompts differ in length")
    return asyncio.run(_query_batch_async(config, list(ids), list(prompts), transport))


def answer_queries(
    config: BackendConfig,
    queries: Sequence[QueryRecord],
    transport: httpx.AsyncBaseTransport | None = None,
) -> list[AnswerRecord]:
    if config.kind == "http_chat":
        return http_query_batch(config, [q.prompt for q in queries], [q.id for q in queries], transport)
    if config.kind == "record_replay":
        return replay(config.path, [q.id for q in queries])
    return _local_answers(config, queries)
