"""Triple store with interned ids, adjacency lists and bounded BFS."""

from __future__ import annotations

import json
import logging
import random
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1


class KGError(Exception):
    """Raised for malformed triple files and invalid graph queries."""


class UnknownIdError(KGError, KeyError):
    pass


class Triplet(NamedTuple):
    subject: str
    relation: str
    object: str

    def __str__(self) -> str:
        return f"({self.subject}, {self.relation}, {self.object})"


@dataclass
class Subgraph:
    root: str
    hop_limit: int
    triples: list[Triplet] = field(default_factory=list)
    hop_of: dict[str, int] = field(default_factory=dict)


class KnowledgeGraph:
    """Immutable set of triplets over interned entity and relation tables.

    Triples keep insertion order; their position is the triple id used to
    break ties wherever a deterministic order is needed.
    """

    def __init__(
        self,
        triples: Iterable[tuple[str, str, str]],
        entity_names: dict[str, str] | None = None,
        relation_names: dict[str, str] | None = None,
    ):
        self.entities: list[str] = []
        self.relations: list[str] = []
        self._entity_ix: dict[str, int] = {}
        self._relation_ix: dict[str, int] = {}
        self._triples: list[tuple[int, int, int]] = []
        self._triple_ix: dict[tuple[int, int, int], int] = {}
        self.duplicates = 0
        for s, r, o in triples:
            key = (self._intern_entity(s), self._intern_relation(r), self._intern_entity(o))
            if key in self._triple_ix:
                self.duplicates += 1
                continue
            self._triple_ix[key] = len(self._triples)
            self._triples.append(key)

        self.adjacency: list[list[int]] = [[] for _ in self.entities]
        for tid, (s, _, o) in enumerate(self._triples):
            self.adjacency[s].append(tid)
            if o != s:
                self.adjacency[o].append(tid)

        self.entity_names = dict(entity_names or {})
        self.relation_names = dict(relation_names or {})
        self._objects_by_relation: dict[int, set[int]] | None = None
        self._objects_by_sr: dict[tuple[int, int], list[int]] | None = None
        if self.duplicates:
            log.info("dropped %d duplicate triples", self.duplicates)

    def _intern_entity(self, name: str) -> int:
        if not name:
            raise KGError("empty entity name")
        ix = self._entity_ix.get(name)
        if ix is None:
            ix = self._entity_ix[name] = len(self.entities)
            self.entities.append(name)
        return ix

    def _intern_relation(self, name: str) -> int:
        if not name:
            raise KGError("empty relation name")
        ix = self._relation_ix.get(name)
        if ix is None:
            ix = self._relation_ix[name] = len(self.relations)
            self.relations.append(name)
        return ix

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triplet]:
        return (self._decode(t) for t in self._triples)

    def __contains__(self, t: object) -> bool:
        if not isinstance(t, tuple) or len(t) != 3:
            return False
        s, r, o = t
        key = (self._entity_ix.get(s), self._relation_ix.get(r), self._entity_ix.get(o))
        return key in self._triple_ix

    def __repr__(self) -> str:
        return (
            f"KnowledgeGraph(entities={len(self.entities)}, "
            f"relations={len(self.relations)}, triples={len(self)})"
        )

    @property
    def triples(self) -> list[Triplet]:
        return list(self)

    def _decode(self, key: tuple[int, int, int]) -> Triplet:
        s, r, o = key
        return Triplet(self.entities[s], self.relations[r], self.entities[o])

    def entity_id(self, name: str) -> int:
        try:
            return self._entity_ix[name]
        except KeyError:
            raise UnknownIdError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._relation_ix[name]
        except KeyError:
            raise UnknownIdError(f"unknown relation {name!r}") from None

    def has_entity(self, name: str) -> bool:
        return name in self._entity_ix

    def has_relation(self, name: str) -> bool:
        return name in self._relation_ix

    def triple(self, tid: int) -> Triplet:
        return self._decode(self._triples[tid])

    def relation_of(self, tid: int) -> str:
        return self.relations[self._triples[tid][1]]

    def triple_id(self, t: Triplet) -> int | None:
        """Insertion index of ``t``, or None when it is not in the graph."""
        s, r, o = t
        key = (self.entity_id(s), self.relation_id(r), self.entity_id(o))
        return self._triple_ix.get(key)

    def contains(self, t: Triplet) -> bool:
        """Closed-world membership; unknown names raise UnknownIdError."""
        return self.triple_id(t) is not None

    def entity_name(self, key: str) -> str:
        return self.entity_names.get(key, key)

    def relation_name(self, key: str) -> str:
        return self.relation_names.get(key, key)

    def incident(self, entity: str) -> list[Triplet]:
        return [self.triple(tid) for tid in self.adjacency[self.entity_id(entity)]]

    def _build_object_indexes(self) -> None:
        by_rel: dict[int, set[int]] = {}
        by_sr: dict[tuple[int, int], list[int]] = {}
        for s, r, o in self._triples:
            by_rel.setdefault(r, set()).add(o)
            by_sr.setdefault((s, r), []).append(o)
        self._objects_by_relation = by_rel
        self._objects_by_sr = by_sr

    def objects_of_relation(self, relation: str) -> set[str]:
        """Entities that appear as object of some triple with ``relation``.

        A relation listed only in the relation name map has no objects.
        """
        if relation not in self._relation_ix and relation in self.relation_names:
            return set()
        rid = self.relation_id(relation)
        if self._objects_by_relation is None:
            self._build_object_indexes()
        return {self.entities[o] for o in self._objects_by_relation.get(rid, ())}

    def objects(self, subject: str, relation: str) -> list[str]:
        """Objects v with (subject, relation, v) in the graph, in insertion order."""
        key = (self.entity_id(subject), self.relation_id(relation))
        if self._objects_by_sr is None:
            self._build_object_indexes()
        return [self.entities[o] for o in self._objects_by_sr.get(key, ())]

    def bounded_bfs(self, root: str, hops: int, directed: bool = False) -> Subgraph:
        """Collect every triple discovered while expanding nodes closer than ``hops``.

        Edges are walked in both directions unless ``directed`` is set; the
        emitted triples always keep their stored orientation. Discovery order
        is FIFO over adjacency lists, which follow insertion order.
        """
        if hops < 0:
            raise KGError("hop limit must be non-negative")
        start = self.entity_id(root)
        hop_of = {start: 0}
        seen_triples: set[int] = set()
        order: list[int] = []
        queue = deque([start])
        while queue:
            node = queue.popleft()
            depth = hop_of[node]
            if depth >= hops:
                continue
            for tid in self.adjacency[node]:
                s, _, o = self._triples[tid]
                if directed and s != node:
                    continue
                if tid not in seen_triples:
                    seen_triples.add(tid)
                    order.append(tid)
                nxt = o if s == node else s
                if nxt not in hop_of:
                    hop_of[nxt] = depth + 1
                    queue.append(nxt)
        return Subgraph(
            root=root,
            hop_limit=hops,
            triples=[self.triple(tid) for tid in order],
            hop_of={self.entities[e]: d for e, d in hop_of.items()},
        )


def contains(kg: KnowledgeGraph, t: Triplet) -> bool:
    return kg.contains(t)


def bounded_bfs(kg: KnowledgeGraph, root: str, hops: int, directed: bool = False) -> Subgraph:
    return kg.bounded_bfs(root, hops, directed=directed)


def objects_of_relation(kg: KnowledgeGraph, relation: str) -> set[str]:
    return kg.objects_of_relation(relation)


def _read_name_map(path: str | Path) -> dict[str, str]:
    names = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise KGError(f"{path}:{lineno}: expected 2 tab-separated fields, got {len(parts)}")
            names[parts[0]] = parts[1]
    return names


def _iter_triple_lines(path: str | Path) -> Iterator[tuple[str, str, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise KGError(f"{path}:{lineno}: expected 3 tab-separated fields, got {line!r}")
            yield parts[0], parts[1], parts[2]


def load_triples(
    path: str | Path,
    entity_names: str | Path | None = None,
    relation_names: str | Path | None = None,
    cap: int | None = None,
    seed: int = 0,
) -> KnowledgeGraph:
    """Load a ``subject<TAB>relation<TAB>object`` file.

    With ``cap`` set, a uniform reservoir sample of at most ``cap`` lines is
    kept (used for Wiki-scale dumps).
    """
    lines: Iterable[tuple[str, str, str]] = _iter_triple_lines(path)
    if cap is not None:
        rng = random.Random(seed)
        reservoir: list[tuple[str, str, str]] = []
        for i, item in enumerate(lines):
            if i < cap:
                reservoir.append(item)
            else:
                j = rng.randint(0, i)
                if j < cap:
                    reservoir[j] = item
        lines = reservoir
    kg = KnowledgeGraph(
        lines,
        entity_names=_read_name_map(entity_names) if entity_names else None,
        relation_names=_read_name_map(relation_names) if relation_names else None,
    )
    if not len(kg):
        raise KGError(f"{path}: no triples")
    log.info(
        "loaded %s: %d entities, %d relations, %d triples",
        path, len(kg.entities), len(kg.relations), len(kg),
    )
    return kg


def write_triples(kg: KnowledgeGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in kg:
            fh.write("\t".join(t) + "\n")


def save_snapshot(kg: KnowledgeGraph, path: str | Path) -> None:
    """Write a version-tagged ``.npz`` snapshot for fast reload."""
    header = {
        "version": SNAPSHOT_VERSION,
        "entities": kg.entities,
        "relations": kg.relations,
        "entity_names": kg.entity_names,
        "relation_names": kg.relation_names,
    }
    with open(path, "wb") as fh:
        np.savez_compressed(
            fh,
            header=np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8),
            triples=np.asarray(kg._triples, dtype=np.int64).reshape(-1, 3),
        )


def load_snapshot(path: str | Path) -> KnowledgeGraph:
    with np.load(path) as data:
        header = json.loads(data["header"].tobytes().decode("utf-8"))
        ids = data["triples"]
    if header.get("version") != SNAPSHOT_VERSION:
        raise KGError(f"{path}: unsupported snapshot version {header.get('version')!r}")
    ents, rels = header["entities"], header["relations"]
    return KnowledgeGraph(
        ((ents[s], rels[r], ents[o]) for s, r, o in ids.tolist()),
        entity_names=header["entity_names"],
        relation_names=header["relation_names"],
    )


def load_kg(path: str | Path) -> KnowledgeGraph:
    """Load either a snapshot or a plain triple file, sniffing the zip magic."""
    with open(path, "rb") as fh:
        if fh.read(4) == b"PK\x03\x04":
            return load_snapshot(path)
    return load_triples(path)


def fixture_kg() -> KnowledgeGraph:
    """The five-triple Oceania/Europe graph bundled with the package."""
    data = resources.files("logicheck") / "data"
    with resources.as_file(data / "fixture_kg.tsv") as triples, resources.as_file(
        data / "fixture_entities.tsv"
    ) as names:
        return load_triples(triples, entity_names=names)


def synthetic_kg(
    n_triples: int = 1000,
    n_entities: int = 200,
    n_relations: int = 12,
    seed: int = 0,
) -> KnowledgeGraph:
    """Random graph with Freebase-style hierarchical relation names.

    About a tenth of the triples close a two-hop path so that syllogism and
    two-hop quantifier facts can be mined.
    """
    rng = random.Random(seed)
    domains = ["location", "film", "award", "people", "sports", "music"]
    relations = [
        f"/{domains[i % len(domains)]}/{domains[i % len(domains)]}_rel{i}"
        for i in range(n_relations)
    ]
    entities = [f"e{i}" for i in range(n_entities)]
    seen: set[tuple[str, str, str]] = set()
    out: list[tuple[str, str, str]] = []

    def add(t: tuple[str, str, str]) -> None:
        if t[0] != t[2] and t not in seen:
            seen.add(t)
            out.append(t)

    while len(out) < n_triples:
        if out and rng.random() < 0.1:
            s, _, mid = rng.choice(out)
            nexts = [t for t in out[-200:] if t[0] == mid]
            if nexts:
                add((s, rng.choice(relations), rng.choice(nexts)[2]))
                continue
        add((rng.choice(entities), rng.choice(relations), rng.choice(entities)))
    names = {e: f"Entity {e[1:]}" for e in entities}
    return KnowledgeGraph(out, entity_names=names)
