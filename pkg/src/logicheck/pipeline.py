"""Stage functions shared by the CLI and library users, plus the run manifest."""

from __future__ import annotations

import hashlib
import json
import platform
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .backends import AnswerRecord, BackendConfig, answer_queries
from .context import ContextSpec, Embedder, TripleIndex, build_context, hash_embedder
from .forge import LabeledFact
from .kg import KnowledgeGraph
from .metrics import MetricRow, group_results, metric_rows
from .prompts import PromptTemplate, QueryRecord, render_fact_text, render_query


def build_queries(
    kg: KnowledgeGraph,
    facts: Sequence[LabeledFact],
    spec: ContextSpec = ContextSpec(),
    template: PromptTemplate = PromptTemplate(),
    embedder: Embedder | None = None,
    chat_markers: bool = True,
) -> list[QueryRecord]:
    index = None
    if spec.strategy != "bfs_hierarchy":
        index = TripleIndex(kg, embedder or hash_embedder)
    out = []
    for f in facts:
        ctx = build_context(kg, f.fact, spec, index=index)
        text = render_fact_text(f.fact, kg)
        prompt = render_query(ctx, text, template, chat_markers=chat_markers)
        out.append(
            QueryRecord(f.id, f.fact, text, ctx, prompt, f.label, f.group, f.fact_type, f.role)
        )
    return out


def result_rows(queries: Sequence[QueryRecord], answers: Sequence[AnswerRecord]) -> list[dict]:
    rows = []
    for q, a in zip(queries, answers, strict=True):
        if q.id != a.query_id:
            raise ValueError(f"answer {a.query_id} out of order for query {q.id}")
        row = q.to_json()
        row.update(
            raw=a.raw, parsed=a.parsed, error=a.error,
            latency_ms=round(a.latency_ms, 3), retries=a.retries,
        )
        rows.append(row)
    return rows


def evaluate_queries(
    queries: Sequence[QueryRecord], config: BackendConfig, transport=None
) -> list[dict]:
    return result_rows(queries, answer_queries(config, queries, transport=transport))


def score(results: Iterable[dict], dataset: str = "dataset", syllogism_mode: str = "equal") -> list[MetricRow]:
    return metric_rows(group_results(results), dataset, syllogism_mode)


def run_pipeline(
    kg: KnowledgeGraph,
    facts: Sequence[LabeledFact],
    config: BackendConfig,
    spec: ContextSpec = ContextSpec(),
    template: PromptTemplate = PromptTemplate(),
    dataset: str = "dataset",
) -> tuple[list[QueryRecord], list[dict], list[MetricRow]]:
    """Context building, answering and scoring in one call."""
    queries = build_queries(kg, facts, spec, template)
    results = evaluate_queries(queries, config)
    return queries, results, score(results, dataset)


# -- JSONL -----------------------------------------------------------------


def write_jsonl(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            out.append(obj)
    return out


def read_queries(path: str | Path) -> list[QueryRecord]:
    out = []
    for lineno, obj in enumerate(read_jsonl(path), 1):
        try:
            out.append(QueryRecord.from_json(obj))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}: record {lineno}: {exc}") from exc
    return out


# -- manifest --------------------------------------------------------------


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StageEntry:
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    seconds: float = 0.0


@dataclass
class RunManifest:
    tool_version: str = __version__
    python: str = field(default_factory=platform.python_version)
    stages: dict[str, StageEntry] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> RunManifest:
        p = Path(path)
        if not p.exists():
            return cls()
        obj = json.loads(p.read_text(encoding="utf-8"))
        stages = {k: StageEntry(**v) for k, v in obj.get("stages", {}).items()}
        return cls(obj.get("tool_version", __version__), obj.get("python", ""), stages)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @contextmanager
    def stage(self, name: str, config: dict, inputs: Sequence[str | Path] = ()):
        """Record config, input digests, then output digests and wall time."""
        entry = StageEntry(
            config={k: v for k, v in config.items()},
            inputs={str(p): file_digest(p) for p in inputs},
        )
        t0 = time.perf_counter()
        outputs: list[str | Path] = []
        yield outputs
        entry.outputs = {str(p): file_digest(p) for p in outputs}
        entry.seconds = round(time.perf_counter() - t0, 4)
        self.stages[name] = entry
