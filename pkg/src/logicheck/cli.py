"""Command-line pipeline: ingest, generate, build-context, evaluate, report, export-sft.

Every stage records itself in ``manifest.json`` next to its output. A TOML
config passed with ``--config`` supplies defaults per command (one table per
command, keys named like the flags); explicit flags win.

Exit codes: 0 ok, 2 schema error, 3 backend error, 4 config error.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import __version__
from .backends import BACKEND_KINDS, BackendConfig, BackendError, record
from .context import STRATEGIES, ContextError, ContextSpec, HttpEmbedder
from .forge import FACT_TYPES, GenerationError, SplitSpec, export_sft, generate, read_facts, split, write_facts
from .kg import KGError, load_kg, load_triples, save_snapshot
from .logic import FactError
from .metrics import MetricError, aggregate_report
from .pipeline import (
    RunManifest,
    build_queries,
    evaluate_queries,
    read_jsonl,
    read_queries,
    score,
    write_jsonl,
)
from .prompts import TEMPLATE_KINDS, PromptTemplate

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_SCHEMA, EXIT_BACKEND, EXIT_CONFIG = 2, 3, 4


class StageFailure(click.ClickException):
    def __init__(self, stage: str, code: int, message: str):
        super().__init__(f"[{stage}] {message}")
        self.exit_code = code


def _load_config(ctx: click.Context, _param, value):
    if value is None:
        return None
    try:
        with open(value, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise StageFailure("config", EXIT_CONFIG, f"{value}: {exc}") from None
    default_map = {}
    for command, table in data.items():
        if not isinstance(table, dict):
            raise StageFailure("config", EXIT_CONFIG, f"{value}: [{command}] must be a table")
        default_map[command] = {k.replace("-", "_"): v for k, v in table.items()}
    ctx.default_map = default_map
    return value


def _manifest_path(out: Path) -> Path:
    return (out if out.is_dir() else out.parent) / "manifest.json"


def _guard(stage: str, fn):
    """Run ``fn`` translating library errors into stage failures with exit codes."""
    try:
        return fn()
    except StageFailure:
        raise
    except BackendError as exc:
        raise StageFailure(stage, EXIT_BACKEND, str(exc)) from None
    except (ContextError, GenerationError, MetricError) as exc:
        raise StageFailure(stage, EXIT_CONFIG, str(exc)) from None
    except (KGError, FactError, ValueError, KeyError, TypeError) as exc:
        raise StageFailure(stage, EXIT_SCHEMA, str(exc)) from None
    except FileNotFoundError as exc:
        raise StageFailure(stage, EXIT_SCHEMA, f"missing file {exc.filename}") from None


@click.group()
@click.version_option(__version__)
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config,
              is_eager=True, expose_value=False, help="TOML file with per-command defaults.")
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--triples", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--names", "entity_names", type=click.Path(exists=True, dir_okay=False),
              help="Entity id -> name map.")
@click.option("--relation-names", type=click.Path(exists=True, dir_okay=False))
@click.option("--cap", type=int, help="Reservoir-sample at most this many triples.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
def ingest(triples, entity_names, relation_names, cap, seed, out):
    """Load a triple file and write a binary snapshot."""
    manifest = RunManifest.load(_manifest_path(out))
    inputs = [p for p in (triples, entity_names, relation_names) if p]
    cfg = dict(cap=cap, seed=seed)
    with manifest.stage("ingest", cfg, inputs) as outputs:
        kg = _guard("ingest", lambda: load_triples(triples, entity_names, relation_names, cap, seed))
        save_snapshot(kg, out)
        outputs.append(out)
    manifest.save(_manifest_path(out))
    click.echo(f"{len(kg.entities)} entities, {len(kg.relations)} relations, {len(kg)} triples")


def _parse_types(value: str) -> list[str]:
    types = list(FACT_TYPES) if value == "all" else [t.strip() for t in value.split(",") if t.strip()]
    bad = [t for t in types if t not in FACT_TYPES]
    if bad:
        raise StageFailure("generate", EXIT_CONFIG, f"unknown fact types {bad}")
    return types


@main.command("generate")
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--fact-types", default="simple_pair,conj,disj", show_default=True,
              help="Comma-separated fact types, or 'all'.")
@click.option("--n", type=int, default=11000, show_default=True, help="Groups per fact type.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--splits", default="1000,5000,5000", show_default=True,
              help="train,eval,test group counts per fact type, or 'none'.")
@click.option("--shared-subject", is_flag=True, help="Compound atoms share one subject.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False, path_type=Path))
def generate_cmd(kg_path, fact_types, n, seed, splits, shared_subject, out_dir):
    """Generate labeled facts, split by group."""
    types = _parse_types(fact_types)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.load(out_dir / "manifest.json")
    cfg = dict(fact_types=types, n=n, seed=seed, splits=splits, shared_subject=shared_subject)
    with manifest.stage("generate", cfg, [kg_path]) as outputs:
        kg = _guard("generate", lambda: load_kg(kg_path))
        facts = _guard("generate", lambda: generate(kg, types, n, seed, shared_subject))
        if splits == "none":
            write_facts(facts, out_dir / "facts.jsonl")
            outputs.append(out_dir / "facts.jsonl")
        else:
            try:
                counts = [int(x) for x in splits.split(",")]
                spec = SplitSpec(*counts, seed=seed)
            except (ValueError, TypeError):
                raise StageFailure("generate", EXIT_CONFIG, f"bad --splits {splits!r}") from None
            for name, part in zip(("train", "eval", "test"), split(facts, spec)):
                write_facts(part, out_dir / f"{name}.jsonl")
                outputs.append(out_dir / f"{name}.jsonl")
    manifest.save(out_dir / "manifest.json")
    click.echo(f"{len(facts)} facts written to {out_dir}")


@main.command("build-context")
@click.option("--kg", "kg_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--facts", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", type=click.Choice(STRATEGIES), default="bfs_hierarchy", show_default=True)
@click.option("--hops", type=int, default=2, show_default=True)
@click.option("--budget", type=int, default=1000, show_default=True)
@click.option("--top-k", type=int, default=50, show_default=True)
@click.option("--directed", is_flag=True, help="Follow edges subject->object only.")
@click.option("--template", type=click.Choice(TEMPLATE_KINDS), default="base", show_default=True)
@click.option("--no-chat-markers", is_flag=True, help="Omit the <<SYS>> system block.")
@click.option("--embedder-endpoint", help="HTTP embedding service; default is offline hashing.")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
def build_context_cmd(kg_path, facts, strategy, hops, budget, top_k, directed, template,
                      no_chat_markers, embedder_endpoint, out):
    """Retrieve contexts and render prompts for every fact."""
    spec = _guard("build-context", lambda: ContextSpec(strategy, hops, budget, top_k, directed))
    manifest = RunManifest.load(_manifest_path(out))
    cfg = dict(strategy=strategy, hops=hops, budget=budget, top_k=top_k, directed=directed,
               template=template, chat_markers=not no_chat_markers, embedder=embedder_endpoint)
    with manifest.stage("build-context", cfg, [kg_path, facts]) as outputs:
        kg = _guard("build-context", lambda: load_kg(kg_path))
        labeled = _guard("build-context", lambda: read_facts(facts))
        embedder = HttpEmbedder(embedder_endpoint) if embedder_endpoint else None
        queries = _guard("build-context", lambda: build_queries(
            kg, labeled, spec, PromptTemplate(template), embedder, not no_chat_markers))
        write_jsonl((q.to_json() for q in queries), out)
        outputs.append(out)
    manifest.save(_manifest_path(out))
    click.echo(f"{len(queries)} queries written to {out}")


@main.command("evaluate")
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", type=click.Choice(BACKEND_KINDS), default="oracle", show_default=True)
@click.option("--endpoint")
@click.option("--model")
@click.option("--concurrency", type=int, default=8, show_default=True)
@click.option("--max-retries", type=int, default=3, show_default=True)
@click.option("--timeout", type=float, default=60.0, show_default=True)
@click.option("--epsilon", type=float, default=0.0, show_default=True)
@click.option("--bit", type=int, default=1, show_default=True, help="Answer of the constant backend.")
@click.option("--recording", type=click.Path(dir_okay=False), help="Replay source for record_replay.")
@click.option("--record-to", type=click.Path(dir_okay=False), help="Also save raw answers here.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
def evaluate_cmd(queries, backend, endpoint, model, concurrency, max_retries, timeout, epsilon,
                 bit, recording, record_to, seed, out):
    """Answer every query with the chosen backend."""
    config = _guard("evaluate", lambda: BackendConfig(
        kind=backend, endpoint=endpoint, model=model, concurrency=concurrency,
        max_retries=max_retries, timeout=timeout, epsilon=epsilon, bit=bit,
        path=recording, seed=seed))
    manifest = RunManifest.load(_manifest_path(out))
    cfg = dict(backend=backend, endpoint=endpoint, model=model, concurrency=concurrency,
               epsilon=epsilon, bit=bit, recording=recording, seed=seed, temperature=0)
    with manifest.stage("evaluate", cfg, [queries]) as outputs:
        qs = _guard("evaluate", lambda: read_queries(queries))
        rows = _guard("evaluate", lambda: evaluate_queries(qs, config))
        write_jsonl(rows, out)
        outputs.append(out)
        if record_to:
            from .backends import AnswerRecord

            record((AnswerRecord(r["id"], r["raw"], r["parsed"]) for r in rows), record_to)
            outputs.append(record_to)
    manifest.save(_manifest_path(out))
    failed = sum(r["error"] is not None for r in rows)
    click.echo(f"{len(rows)} answers written to {out} ({failed} failed or unparseable)")
    transport = sum(r["error"] not in (None, "unparseable") for r in rows)
    if rows and transport == len(rows):
        raise StageFailure("evaluate", EXIT_BACKEND, f"every request failed, e.g. {rows[0]['error']}")


@main.command("report")
@click.option("--results", required=True, type=click.Path(exists=True, dir_okay=False), multiple=True)
@click.option("--dataset", default=None, help="Dataset label; defaults to the results file stem.")
@click.option("--syllogism-mode", type=click.Choice(["equal", "implies"]), default="equal",
              show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path))
def report_cmd(results, dataset, syllogism_mode, out):
    """Write report.md and report.csv."""
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.load(out / "manifest.json")
    with manifest.stage("report", dict(dataset=dataset, syllogism_mode=syllogism_mode),
                        list(results)) as outputs:
        rows = []
        for path in results:
            label = dataset or Path(path).stem
            data = _guard("report", lambda: read_jsonl(path))
            rows.extend(_guard("report", lambda: score(data, label, syllogism_mode)))
        md, csv_text = _guard("report", lambda: aggregate_report(rows))
        (out / "report.md").write_text(md, encoding="utf-8")
        (out / "report.csv").write_text(csv_text, encoding="utf-8")
        outputs.extend([out / "report.md", out / "report.csv"])
    manifest.save(out / "manifest.json")
    click.echo(md, nl=False)


@main.command("export-sft")
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
def export_sft_cmd(queries, out):
    """Write prompt/response JSONL for supervised fine-tuning."""
    manifest = RunManifest.load(_manifest_path(out))
    with manifest.stage("export-sft", {}, [queries]) as outputs:
        rows = _guard("export-sft", lambda: read_jsonl(queries))
        for i, r in enumerate(rows, 1):
            if "prompt" not in r or "label" not in r:
                raise StageFailure("export-sft", EXIT_SCHEMA, f"{queries}: record {i} lacks prompt/label")
        n = export_sft(rows, out)
        outputs.append(out)
    manifest.save(_manifest_path(out))
    click.echo(f"{n} examples written to {out}")


if __name__ == "__main__":
    main()
