"""Token-budgeted KG contexts for a fact.

Three strategies are supported: BFS pruned by relation-hierarchy
similarity, BFS pruned by embedding distance, and embedding retrieval over
the whole graph. Triples the fact asserts that are actually in the graph
are always placed first, so a reader that answers by context membership is
exact.
"""

from __future__ import annotations

import hashlib
import itertools
import math
import re
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Literal, Protocol, Sequence

import httpx
import numpy as np

from .kg import KnowledgeGraph, Triplet
from .logic import Exists, Fact, ForAllNeg, triplets_of, two_hop_witnesses

Strategy = Literal["bfs_hierarchy", "bfs_embed", "embed_full"]
STRATEGIES = ("bfs_hierarchy", "bfs_embed", "embed_full")
EMBED_DIM = 256

_SPLIT_TOKENS = re.compile(r"[\s|]+")
_SPLIT_RELATION = re.compile(r"[/.]")


class ContextError(ValueError):
    pass


@dataclass(frozen=True)
class ContextSpec:
    strategy: Strategy = "bfs_hierarchy"
    hops: int = 2
    token_budget: int = 1000
    top_k: int = 50
    directed: bool = False
    token_multiplier: float = 1.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ContextError(f"unknown strategy {self.strategy!r}")
        if self.token_budget <= 0:
            raise ContextError("token budget must be positive")
        if self.strategy != "embed_full" and self.hops < 1:
            raise ContextError("BFS strategies need hops >= 1")
        if self.top_k < 1:
            raise ContextError("top_k must be positive")


@dataclass
class Context:
    triples: list[Triplet] = field(default_factory=list)
    rendered: str = ""
    token_count: int = 0


def token_count(text: str, multiplier: float = 1.0) -> int:
    """Whitespace/pipe-delimited chunks plus one per '|' separator."""
    chunks = sum(1 for c in _SPLIT_TOKENS.split(text) if c)
    return math.ceil((chunks + text.count("|")) * multiplier)


@lru_cache(maxsize=65536)
def relation_similarity(r1: str, r2: str) -> float:
    """Shared leading path segments over the longer segment count."""
    if r1 == r2:
        return 1.0
    a = [s for s in _SPLIT_RELATION.split(r1) if s]
    b = [s for s in _SPLIT_RELATION.split(r2) if s]
    longest = max(len(a), len(b))
    if not longest:
        return 0.0
    shared = 0
    for x, y in zip(a, b):
        if x != y:
            break
        shared += 1
    return shared / longest


def triple_line(kg: KnowledgeGraph | None, t: Triplet) -> str:
    if kg is None:
        return f"{t.subject} | {t.relation} | {t.object}"
    return (
        f"{kg.entity_name(t.subject)} | {kg.relation_name(t.relation)} | "
        f"{kg.entity_name(t.object)}"
    )


def serialize_context(triples: Sequence[Triplet], kg: KnowledgeGraph | None = None) -> str:
    return "\n".join(triple_line(kg, t) for t in triples)


def parse_context(text: str, kg: KnowledgeGraph | None = None) -> list[Triplet]:
    """Inverse of :func:`serialize_context` given the same name maps."""
    if not text:
        return []
    ent = rel = None
    if kg is not None:
        ent = {kg.entity_name(e): e for e in kg.entities}
        rel = {kg.relation_name(r): r for r in kg.relations}
    out = []
    for line in text.split("\n"):
        parts = line.split(" | ")
        if len(parts) != 3:
            raise ContextError(f"malformed context line {line!r}")
        s, r, o = parts
        if ent is not None:
            s, r, o = ent[s], rel[r], ent[o]
        out.append(Triplet(s, r, o))
    return out


# -- embeddings ------------------------------------------------------------


class Embedder(Protocol):
    def __call__(self, texts: Sequence[str]) -> np.ndarray: ...


def hash_embed(text: str, dim: int = EMBED_DIM) -> np.ndarray:
    """Character 3-gram feature hashing, L2-normalized. Empty text maps to zeros."""
    vec = np.zeros(dim)
    if not text:
        return vec
    padded = f"  {text.lower()} "
    for i in range(len(padded) - 2):
        h = hashlib.blake2b(padded[i : i + 3].encode("utf-8"), digest_size=8).digest()
        n = int.from_bytes(h, "little")
        vec[n % dim] += 1.0 if (n >> 63) & 1 == 0 else -1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm else vec


def hash_embedder(texts: Sequence[str]) -> np.ndarray:
    if not texts:
        return np.zeros((0, EMBED_DIM))
    return np.stack([hash_embed(t) for t in texts])


class HttpEmbedder:
    """Batched client for ``POST {"texts": [...]} -> {"vectors": [[...], ...]}``."""

    def __init__(
        self,
        endpoint: str,
        batch_size: int = 64,
        timeout: float = 30.0,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint
        self.batch_size = batch_size
        self.client = client or httpx.Client(timeout=timeout)

    def __call__(self, texts: Sequence[str]) -> np.ndarray:
        rows: list[list[float]] = []
        for i in range(0, len(texts), self.batch_size):
            chunk = list(texts[i : i + self.batch_size])
            resp = self.client.post(self.endpoint, json={"texts": chunk})
            resp.raise_for_status()
            vectors = resp.json().get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(chunk):
                raise ContextError("embedder returned a malformed vectors payload")
            rows.extend(vectors)
        return np.asarray(rows, dtype=float)


class TripleIndex:
    """Exact L2 nearest-neighbour search over triple embeddings.

    Vectors are computed lazily per triple id and cached, so BFS-pruned
    retrieval only embeds the triples it actually sees.
    """

    def __init__(self, kg: KnowledgeGraph, embedder: Embedder = hash_embedder):
        self.kg = kg
        self.embedder = embedder
        self._cache: dict[int, np.ndarray] = {}
        self._matrix: np.ndarray | None = None

    def vectors(self, tids: Sequence[int]) -> np.ndarray:
        missing = [t for t in tids if t not in self._cache]
        if missing:
            embs = self.embedder([triple_line(self.kg, self.kg.triple(t)) for t in missing])
            for t, v in zip(missing, embs):
                self._cache[t] = np.asarray(v, dtype=float)
        if not tids:
            return np.zeros((0, EMBED_DIM))
        return np.stack([self._cache[t] for t in tids])

    def full_matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = self.vectors(list(range(len(self.kg))))
        return self._matrix

    def rank(self, query: str, tids: Sequence[int] | None, top_k: int) -> list[int]:
        """Triple ids ordered by ascending L2 distance to ``query``; ties by id."""
        q = np.asarray(self.embedder([query])[0], dtype=float)
        if tids is None:
            ids = np.arange(len(self.kg))
            mat = self.full_matrix()
        else:
            ids = np.asarray(sorted(tids), dtype=np.int64)
            mat = self.vectors(ids.tolist())
        if not len(ids):
            return []
        dist = np.linalg.norm(mat - q, axis=1)
        order = np.lexsort((ids, dist))
        return ids[order[:top_k]].tolist()


# -- context building ------------------------------------------------------


@dataclass
class _Unit:
    """One retrieval target: an atom, or a two-hop quantified fact."""

    subject: str
    relation: str
    text: str
    gold: list[Triplet]


def _units(kg: KnowledgeGraph, fact: Fact) -> list[_Unit]:
    if isinstance(fact, (Exists, ForAllNeg)):
        gold: list[Triplet] = []
        if kg.has_entity(fact.subject) and kg.has_relation(fact.r1) and kg.has_entity(fact.object):
            witnesses = two_hop_witnesses(
                lambda t: t in kg, kg.objects, fact.subject, fact.r1, fact.r2, fact.object
            )
            if witnesses:
                x = witnesses[0]
                gold = [Triplet(fact.subject, fact.r1, x), Triplet(x, fact.r2, fact.object)]
        text = (
            f"{kg.entity_name(fact.subject)} {kg.relation_name(fact.r1)} x "
            f"{kg.relation_name(fact.r2)} {kg.entity_name(fact.object)}"
        )
        return [_Unit(fact.subject, fact.r1, text, gold)]
    out = []
    for t in triplets_of(fact):
        out.append(
            _Unit(t.subject, t.relation, triple_line(kg, t).replace(" | ", " "), [t] if t in kg else [])
        )
    return out


def _candidates(
    kg: KnowledgeGraph,
    unit: _Unit,
    spec: ContextSpec,
    index: TripleIndex | None,
) -> list[int]:
    if spec.strategy == "embed_full":
        assert index is not None
        return index.rank(unit.text, None, spec.top_k)
    if not kg.has_entity(unit.subject):
        return []
    sub = kg.bounded_bfs(unit.subject, spec.hops, directed=spec.directed)
    tids = [kg.triple_id(t) for t in sub.triples]
    if spec.strategy == "bfs_embed":
        assert index is not None
        return index.rank(unit.text, tids, spec.top_k)
    # stable sort keeps BFS discovery order among equal similarities
    return sorted(tids, key=lambda t: -relation_similarity(unit.relation, kg.relation_of(t)))


def build_context(
    kg: KnowledgeGraph,
    fact: Fact,
    spec: ContextSpec = ContextSpec(),
    embedder: Embedder | None = None,
    index: TripleIndex | None = None,
) -> Context:
    """Retrieve, rank and budget a context for ``fact``.

    Each atom (or quantified two-hop unit) gets an equal share of the token
    budget. Its gold triples go first, then ranked candidates until the share
    runs out. Per-unit lists are interleaved round-robin, dropping repeats.
    """
    if spec.strategy != "bfs_hierarchy" and index is None:
        index = TripleIndex(kg, embedder or hash_embedder)
    units = _units(kg, fact)
    if not units:
        return Context()
    share = spec.token_budget // len(units)
    lines: list[list[Triplet]] = []
    for unit in units:
        ranked = (kg.triple(t) for t in _candidates(kg, unit, spec, index))
        gold = set(unit.gold)
        ordered = itertools.chain(unit.gold, (t for t in ranked if t not in gold))
        kept: list[Triplet] = []
        spent = 0
        for i, t in enumerate(ordered):
            cost = _line_cost(triple_line(kg, t), spec.token_multiplier)
            if spent + cost > share:
                if i < max(1, len(unit.gold)):
                    raise ContextError(
                        f"token budget {spec.token_budget} cannot fit a single triple line "
                        f"({cost} tokens, per-atom share {share})"
                    )
                break
            kept.append(t)
            spent += cost
        lines.append(kept)

    merged: list[Triplet] = []
    seen: set[Triplet] = set()
    for row in _round_robin(lines):
        if row not in seen:
            seen.add(row)
            merged.append(row)
    rendered = serialize_context(merged, kg)
    return Context(merged, rendered, token_count(rendered, spec.token_multiplier))


@lru_cache(maxsize=262144)
def _line_cost(line: str, multiplier: float) -> int:
    return token_count(line, multiplier)


def _round_robin(lists: list[list[Triplet]]):
    longest = max((len(x) for x in lists), default=0)
    for i in range(longest):
        for row in lists:
            if i < len(row):
                yield row[i]


def context_contains(context: Context) -> Callable[[Triplet], bool]:
    members = set(context.triples)
    return members.__contains__
