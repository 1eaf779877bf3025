"""Command-line entry points: ingest, run, metrics, experiments, export, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import LoopwrightError
from .experiments import (
    ExperimentConfig,
    HttpModerationTransport,
    fetch_moderation_scores,
    moderation_compare,
    run_hs_detection,
)
from .gateway import AuditLog, HttpTransport, ModelRegistry
from .labels import AnnotatorKind, CWLabel, PromptMode
from .metrics import (
    AnnotationMatrix,
    cohens_kappa,
    compare_tracks,
    krippendorff_alpha_nominal,
    percent_agreement,
)
from .pipeline import replay_run, run_pipeline
from .records import AnnotationEvent, AnnotatorRef
from .service import AnnotationService, ServiceJudgeClient, create_app
from .store import (
    Dataset,
    EventLog,
    ProjectState,
    canonical_json,
    export_bundle,
    import_corpus,
    read_jsonl,
    read_label_file,
    verify_bundle,
    write_jsonl,
)


def _load_dataset(project_dir: Path) -> Dataset:
    return import_corpus(project_dir / "messages.jsonl")


def _load_registry(path: str | None) -> ModelRegistry:
    return ModelRegistry.load(path) if path else ModelRegistry.default()


def _read_track(path: Path) -> dict[str, CWLabel]:
    """Accept either {claim_id, label} lines or full gold-track records."""
    labels: dict[str, CWLabel] = {}
    for _, obj in read_jsonl(path):
        value = obj.get("label") or obj.get("gold")
        labels[obj["claim_id"]] = CWLabel(value)
    return labels


@click.group()
def main() -> None:
    """Annotation-loop orchestration, agreement statistics, and experiments."""


@main.command()
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--project", type=click.Path(path_type=Path), required=True)
def ingest(corpus: Path, project: Path) -> None:
    """Validate a corpus and initialize a project directory."""
    dataset = import_corpus(corpus)
    project.mkdir(parents=True, exist_ok=True)
    messages = sorted(dataset.messages, key=lambda m: m.message_id)
    write_jsonl(project / "messages.jsonl", "messages", (m.to_dict() for m in messages))
    write_jsonl(
        project / "claims.jsonl",
        "claims",
        (
            dict(c.to_dict(), message_id=c.message_id)
            for c in dataset.claims_in_order()
        ),
    )
    hs = sum(1 for m in dataset.messages if m.hs_label.value == "hateful")
    click.echo(
        f"ingested {len(dataset.messages)} messages "
        f"({hs} HS, {len(dataset.messages) - hs} Non-HS), "
        f"{len(dataset.claims_in_order())} claims -> {project}"
    )


@main.command()
@click.option("--project", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--model", "model_key", required=True)
@click.option("--mode", type=click.Choice(["zero", "one"]), default="zero")
@click.option("--human-file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--judge-file", type=click.Path(exists=True, path_type=Path))
@click.option("--serve-judge", is_flag=True, help="route judge cases to a live service")
@click.option("--service-url", default="http://localhost:8800")
@click.option("--service-project")
@click.option("--operator-token", envvar="LOOPWRIGHT_OPERATOR_TOKEN")
@click.option("--run-name", default="run")
@click.option("--resume", is_flag=True)
@click.option("--seed", type=int, default=0)
@click.option("--registry", "registry_path", type=click.Path(exists=True))
@click.option("--max-workers", type=int, default=4)
@click.option("--audit", is_flag=True, help="log raw requests/responses")
def run(
    project: Path,
    model_key: str,
    mode: str,
    human_file: Path,
    judge_file: Path | None,
    serve_judge: bool,
    service_url: str,
    service_project: str | None,
    operator_token: str | None,
    run_name: str,
    resume: bool,
    seed: int,
    registry_path: str | None,
    max_workers: int,
    audit: bool,
) -> None:
    """Run the annotation loop over a project."""
    if bool(judge_file) == serve_judge:
        raise click.UsageError("provide exactly one of --judge-file or --serve-judge")
    dataset = _load_dataset(project)
    registry = _load_registry(registry_path)
    spec = registry.get(model_key)
    transport = HttpTransport()
    transport.bind(spec)
    human_labels = read_label_file(human_file)
    if serve_judge:
        if not operator_token:
            raise click.UsageError("--serve-judge requires an operator token")
        import httpx

        judge = ServiceJudgeClient(
            httpx.Client(base_url=service_url),
            service_project or project.name,
            operator_token,
        )
    else:
        judge = read_label_file(judge_file)

    run_dir = project / "runs" / run_name
    audit_log = AuditLog(run_dir / "audit.jsonl") if audit else None
    report = run_pipeline(
        dataset,
        spec,
        PromptMode(mode),
        human_labels,
        judge,
        transport,
        run_dir,
        seed=seed,
        resume=resume,
        max_workers=max_workers,
        audit=audit_log,
    )
    (run_dir / "report.json").write_text(
        json.dumps(
            {
                "model": report.model,
                "mode": report.mode.value,
                "seed": report.seed,
                "effort": report.effort.to_dict(),
                "failed": report.failed,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    effort = report.effort
    click.echo(
        f"{effort.total_claims} claims: accepted {effort.accepted}, "
        f"judged {effort.judged_count} ({effort.judged_percent:.2f}%), "
        f"failed {len(report.failed)}"
    )


@main.command()
@click.option("--matrix", type=click.Path(exists=True, path_type=Path))
@click.option(
    "--op",
    type=click.Choice(["agreement", "kappa", "alpha", "compare-tracks"]),
    required=True,
)
@click.option("--rater-a")
@click.option("--rater-b")
@click.option("--gold", type=click.Path(exists=True, path_type=Path))
@click.option("--platinum", type=click.Path(exists=True, path_type=Path))
@click.option("--csv-out", type=click.Path(path_type=Path))
def metrics(
    matrix: Path | None,
    op: str,
    rater_a: str | None,
    rater_b: str | None,
    gold: Path | None,
    platinum: Path | None,
    csv_out: Path | None,
) -> None:
    """Compute an agreement statistic from a matrix or a pair of tracks."""
    if op == "compare-tracks":
        if not gold or not platinum:
            raise click.UsageError("compare-tracks needs --gold and --platinum")
        kappa_3, kappa_2 = compare_tracks(_read_track(gold), _read_track(platinum))
        result = {"op": op, "kappa_3class": kappa_3, "kappa_binary": kappa_2}
    else:
        if not matrix:
            raise click.UsageError(f"{op} needs --matrix")
        cells: dict = {}
        items: list[str] = []
        raters: dict[str, AnnotatorRef] = {}
        for _, obj in read_jsonl(matrix):
            item = str(obj["item"])
            if item not in items:
                items.append(item)
            rater_id = str(obj["rater"])
            ref = raters.setdefault(
                rater_id, AnnotatorRef(AnnotatorKind.HUMAN, rater_id)
            )
            cells[(item, ref)] = CWLabel(obj["label"])
        m = AnnotationMatrix(
            items=tuple(items),
            raters=tuple(raters.values()),
            cells=cells,
            label_space=CWLabel,
        )
        if op == "alpha":
            result = {"op": op, "value": krippendorff_alpha_nominal(m)}
        else:
            if not rater_a or not rater_b:
                raise click.UsageError(f"{op} needs --rater-a and --rater-b")
            fn = percent_agreement if op == "agreement" else cohens_kappa
            result = {"op": op, "value": fn(m, rater_a, rater_b)}
    click.echo(json.dumps(result, indent=2))
    if csv_out:
        keys = [k for k in result if k != "op"]
        csv_out.write_text(
            ",".join(keys) + "\n" + ",".join(f"{result[k]:.6f}" for k in keys) + "\n",
            encoding="utf-8",
        )


@main.group()
def experiment() -> None:
    """Downstream experiments."""


def _load_experiment_config(path: Path) -> ExperimentConfig:
    if path.suffix == ".json":
        return ExperimentConfig.from_dict(
            json.loads(path.read_text(encoding="utf-8"))
        )
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    with path.open("rb") as fh:
        return ExperimentConfig.from_dict(tomllib.load(fh))


@experiment.command("hs-detect")
@click.option("--config", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--project", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--cw-file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--registry", "registry_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(path_type=Path), default=Path("hs_detect.csv"))
def hs_detect(
    config: Path, project: Path, cw_file: Path, registry_path: str | None, out: Path
) -> None:
    """Hate-speech detection with and without check-worthiness wrapping."""
    cfg = _load_experiment_config(config)
    dataset = _load_dataset(project)
    registry = _load_registry(registry_path)
    transport = HttpTransport()
    for key in cfg.models:
        transport.bind(registry.get(key))
    results = run_hs_detection(
        cfg, dataset, _read_track(cw_file), registry, transport
    )
    results.write_csv(out)
    results.write_per_run(out.with_suffix(".runs.jsonl"))
    click.echo(f"wrote {out}")


@experiment.command("moderation")
@click.option("--project", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--cw-file", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--scores-cache", type=click.Path(path_type=Path), required=True)
@click.option("--endpoint", default="https://api.openai.com/v1/moderations")
@click.option("--out", type=click.Path(path_type=Path))
def moderation(
    project: Path, cw_file: Path, scores_cache: Path, endpoint: str, out: Path | None
) -> None:
    """Compare moderation scores between messages with and without CFS claims."""
    dataset = _load_dataset(project)
    transport = HttpModerationTransport(endpoint)
    scores = fetch_moderation_scores(dataset, transport, scores_cache)
    comparisons = moderation_compare(dataset, scores, _read_track(cw_file))
    rows = [c.to_dict() for c in comparisons]
    click.echo(json.dumps(rows, indent=2))
    if out:
        header = list(rows[0]) if rows else []
        lines = [",".join(header)]
        lines += [",".join(str(row[k]) for k in header) for row in rows]
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")


@main.command()
@click.option("--project", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--run", "run_name", default="run")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--platinum-file", type=click.Path(exists=True, path_type=Path))
def export(
    project: Path, run_name: str, out: Path, platinum_file: Path | None
) -> None:
    """Assemble the release bundle from a completed run."""
    dataset = _load_dataset(project)
    run_dir = project / "runs" / run_name
    report = replay_run(run_dir, dataset)
    header, events = EventLog(run_dir / "events.log", kind="pipeline_run").read()
    human_ref = AnnotatorRef(AnnotatorKind.HUMAN, header.get("human_id", "annotator1"))
    judge_ref = AnnotatorRef(AnnotatorKind.JUDGE, header.get("judge_id", "judge"))

    from .records import _parse_ts  # noqa: PLC0415

    annotation_events = []
    for event in events:
        ts = _parse_ts(event["ts"]) if "ts" in event else None
        if event.get("kind") == "claim_routing" and ts:
            annotation_events.append(
                AnnotationEvent(
                    claim_id=event["claim_id"],
                    source=human_ref,
                    label=CWLabel(event["human"]),
                    created_at=ts,
                )
            )
        elif event.get("kind") == "claim_adjudication" and ts:
            annotation_events.append(
                AnnotationEvent(
                    claim_id=event["claim_id"],
                    source=judge_ref,
                    label=CWLabel(event["judge_label"]),
                    created_at=ts,
                )
            )
    state = ProjectState(
        dataset=dataset,
        annotation_events=annotation_events,
        triples=list(report.triples.values()),
        gold=report.finals,
        platinum=read_label_file(platinum_file) if platinum_file else {},
    )
    bundle = export_bundle(state, out)
    click.echo(canonical_json(bundle.manifest))


@main.command()
@click.option("--bundle", type=click.Path(exists=True, path_type=Path), required=True)
def verify(bundle: Path) -> None:
    """Check manifest counts and referential integrity of a bundle."""
    problems = verify_bundle(bundle)
    if problems:
        for problem in problems:
            click.echo(f"FAIL {problem}", err=True)
        sys.exit(1)
    click.echo("bundle ok")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8800)
@click.option("--config", type=click.Path(exists=True, path_type=Path))
def serve(host: str, port: int, config: Path | None) -> None:
    """Start the annotation service, optionally preloading projects."""
    import uvicorn

    service = AnnotationService()
    if config:
        payload = json.loads(config.read_text(encoding="utf-8"))
        for entry in payload.get("projects", []):
            dataset = import_corpus(entry["corpus"])
            service.create_project(
                entry["project_id"],
                [m.to_dict() for m in dataset.messages],
                entry["tokens"],
                lease_ttl_seconds=float(
                    entry.get("lease_ttl_seconds", 30 * 60)
                ),
                include_message_context=bool(
                    entry.get("include_message_context", False)
                ),
            )
            click.echo(f"loaded project {entry['project_id']}")
    uvicorn.run(create_app(service), host=host, port=port)


if __name__ == "__main__":
    try:
        main()
    except LoopwrightError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
