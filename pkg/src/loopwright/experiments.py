"""Downstream experiments: detection with/without label wrapping, moderation scores.

The detection harness runs every configured model under both prompt
conditions, averages macro metrics across repeated runs, and reports the F1
delta attributable to check-worthiness wrapping. The moderation harness
compares score distributions between messages with and without check-worthy
claims.
"""

from __future__ import annotations

import hashlib
import json
import os
import statistics
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import httpx

from .errors import (
    EndpointUnavailable,
    LoopwrightError,
    MissingCWLabel,
    MissingScores,
    OutputNeverValid,
)
from .gateway import AuditLog, ModelRegistry, Transport, complete_label
from .labels import CWLabel, HSLabel, SizeClass
from .metrics import GroupComparison, Prf, compare_groups, macro_prf
from .prompts import build_hs_prompt, wrap_claims
from .records import ClaimRecord
from .store import Dataset, canonical_json

FAILURE_RATE_LIMIT = 0.05


class Condition(Enum):
    WITH_CW = "with_cw"
    WITHOUT_CW = "without_cw"


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[str, ...]
    runs_per_model: int = 3
    conditions: tuple[Condition, ...] = (Condition.WITH_CW, Condition.WITHOUT_CW)
    seed: int = 0
    cw_track: str = "gold"
    temperature: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if self.runs_per_model < 1:
            raise ValueError("runs_per_model must be >= 1")
        if not self.conditions:
            raise ValueError("at least one condition is required")
        if self.cw_track not in ("gold", "platinum"):
            raise ValueError("cw_track must be 'gold' or 'platinum'")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        return cls(
            models=tuple(data["models"]),
            runs_per_model=int(data.get("runs_per_model", 3)),
            conditions=tuple(
                Condition(c) for c in data.get("conditions", ["with_cw", "without_cw"])
            ),
            seed=int(data.get("seed", 0)),
            cw_track=data.get("cw_track", "gold"),
            temperature=data.get("temperature"),
        )


def reconstruct_message(
    claims: Sequence[ClaimRecord],
    labels: Mapping[str, CWLabel] | None,
    with_cw: bool,
) -> str:
    """Concatenate a message's claims in index order, optionally tagged."""
    ordered = sorted(claims, key=lambda c: c.index)
    pairs = [
        (c.text, labels.get(c.claim_id) if labels is not None else None)
        for c in ordered
    ]
    return wrap_claims(pairs, with_cw)


# ---------------------------------------------------------------------------
# Hate-speech detection


@dataclass(frozen=True)
class RunMetrics:
    run_index: int
    prf: Prf
    evaluated: int
    failed: int

    def to_dict(self) -> dict:
        return {
            "run_index": self.run_index,
            "precision": self.prf.precision,
            "recall": self.prf.recall,
            "f1": self.prf.f1,
            "evaluated": self.evaluated,
            "failed": self.failed,
        }


@dataclass(frozen=True)
class CellStats:
    """Mean and population std of macro metrics across runs of one condition."""

    runs: tuple[RunMetrics, ...]

    def _values(self, attr: str) -> list[float]:
        return [getattr(r.prf, attr) for r in self.runs]

    def mean(self, attr: str) -> float:
        return statistics.fmean(self._values(attr))

    def std(self, attr: str) -> float:
        values = self._values(attr)
        return statistics.pstdev(values) if len(values) > 1 else 0.0

    @property
    def valid(self) -> bool:
        return all(
            r.failed <= FAILURE_RATE_LIMIT * (r.evaluated + r.failed)
            for r in self.runs
        )


@dataclass(frozen=True)
class ModelResult:
    model: str
    size_class: SizeClass
    cells: Mapping[Condition, CellStats]

    @property
    def delta_f1(self) -> float | None:
        if Condition.WITH_CW in self.cells and Condition.WITHOUT_CW in self.cells:
            return self.cells[Condition.WITH_CW].mean("f1") - self.cells[
                Condition.WITHOUT_CW
            ].mean("f1")
        return None


@dataclass
class DetectionResults:
    rows: list[ModelResult]

    def size_class_average(self, size: SizeClass, condition: Condition) -> Prf | None:
        rows = [
            r for r in self.rows if r.size_class is size and condition in r.cells
        ]
        if not rows:
            return None
        return Prf(
            statistics.fmean(r.cells[condition].mean("precision") for r in rows),
            statistics.fmean(r.cells[condition].mean("recall") for r in rows),
            statistics.fmean(r.cells[condition].mean("f1") for r in rows),
        )

    def size_class_delta_f1(self, size: SizeClass) -> float | None:
        with_avg = self.size_class_average(size, Condition.WITH_CW)
        without_avg = self.size_class_average(size, Condition.WITHOUT_CW)
        if with_avg is None or without_avg is None:
            return None
        return with_avg.f1 - without_avg.f1

    def _check_aggregates(self) -> None:
        # Means/stds must be re-derivable from the per-run records they claim
        # to summarize; a drifted aggregate is a bug, not a rounding issue.
        for row in self.rows:
            for stats_cell in row.cells.values():
                f1s = [r.prf.f1 for r in stats_cell.runs]
                if abs(statistics.fmean(f1s) - stats_cell.mean("f1")) > 1e-12:
                    raise LoopwrightError(
                        f"aggregate mismatch for {row.model}; per-run metrics "
                        "disagree with the summarized mean"
                    )

    def to_csv(self) -> str:
        self._check_aggregates()
        header = [
            "model",
            "size_class",
            "P_with_cw",
            "R_with_cw",
            "F1_with_cw",
            "P_with_cw_std",
            "R_with_cw_std",
            "F1_with_cw_std",
            "P_without_cw",
            "R_without_cw",
            "F1_without_cw",
            "P_without_cw_std",
            "R_without_cw_std",
            "F1_without_cw_std",
            "delta_F1",
        ]
        lines = [",".join(header)]

        def cell_fields(cells: Mapping[Condition, CellStats], cond: Condition) -> list[str]:
            if cond not in cells:
                return [""] * 6
            c = cells[cond]
            return [
                f"{c.mean('precision'):.6f}",
                f"{c.mean('recall'):.6f}",
                f"{c.mean('f1'):.6f}",
                f"{c.std('precision'):.6f}",
                f"{c.std('recall'):.6f}",
                f"{c.std('f1'):.6f}",
            ]

        for row in self.rows:
            fields = [row.model, row.size_class.value]
            fields += cell_fields(row.cells, Condition.WITH_CW)
            fields += cell_fields(row.cells, Condition.WITHOUT_CW)
            fields.append("" if row.delta_f1 is None else f"{row.delta_f1:+.6f}")
            lines.append(",".join(fields))

        for size in SizeClass:
            with_avg = self.size_class_average(size, Condition.WITH_CW)
            without_avg = self.size_class_average(size, Condition.WITHOUT_CW)
            if with_avg is None and without_avg is None:
                continue
            fields = [f"avg_{size.value}", size.value]
            for avg in (with_avg, without_avg):
                if avg is None:
                    fields += [""] * 6
                else:
                    fields += [
                        f"{avg.precision:.6f}",
                        f"{avg.recall:.6f}",
                        f"{avg.f1:.6f}",
                        "",
                        "",
                        "",
                    ]
            delta = self.size_class_delta_f1(size)
            fields.append("" if delta is None else f"{delta:+.6f}")
            lines.append(",".join(fields))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def write_per_run(self, path: str | Path) -> None:
        rows = []
        for row in self.rows:
            for condition, cell in row.cells.items():
                for run in cell.runs:
                    rows.append(
                        dict(
                            run.to_dict(),
                            model=row.model,
                            condition=condition.value,
                        )
                    )
        Path(path).write_text(
            "\n".join(canonical_json(r) for r in rows) + "\n", encoding="utf-8"
        )


def run_hs_detection(
    cfg: ExperimentConfig,
    dataset: Dataset,
    cw_labels: Mapping[str, CWLabel],
    registry: ModelRegistry,
    transport: Transport,
    *,
    audit: AuditLog | None = None,
) -> DetectionResults:
    """Classify every message under each configured model and condition.

    Per-message endpoint failures are excluded from that run's metrics and
    counted; a run losing more than 5% of messages is flagged invalid through
    ``CellStats.valid``.
    """
    messages = sorted(dataset.messages, key=lambda m: m.message_id)
    if Condition.WITH_CW in cfg.conditions:
        unlabeled = [
            c.claim_id
            for m in messages
            for c in m.claims
            if c.claim_id not in cw_labels
        ]
        if unlabeled:
            raise MissingCWLabel(
                f"{len(unlabeled)} claims lack a {cfg.cw_track} label, "
                f"e.g. {unlabeled[:5]}"
            )

    rows: list[ModelResult] = []
    for model_key in cfg.models:
        spec = registry.get(model_key)
        cells: dict[Condition, CellStats] = {}
        for condition in cfg.conditions:
            with_cw = condition is Condition.WITH_CW
            runs: list[RunMetrics] = []
            for run_index in range(cfg.runs_per_model):
                gold: list[HSLabel] = []
                pred: list[HSLabel] = []
                failed = 0
                for message in messages:
                    pairs = [
                        (c.text, cw_labels.get(c.claim_id))
                        for c in message.claims_in_order()
                    ]
                    prompt = build_hs_prompt(pairs, with_cw)
                    try:
                        idx, _, _ = complete_label(
                            spec,
                            prompt,
                            transport,
                            reference=message.message_id,
                            audit=audit,
                            temperature=cfg.temperature,
                        )
                    except (EndpointUnavailable, OutputNeverValid):
                        failed += 1
                        continue
                    gold.append(message.hs_label)
                    pred.append(HSLabel(prompt.allowed_outputs[idx]))
                if not gold:
                    raise LoopwrightError(
                        f"model {model_key}: every message failed in run {run_index}"
                    )
                runs.append(
                    RunMetrics(
                        run_index=run_index,
                        prf=macro_prf(gold, pred),
                        evaluated=len(gold),
                        failed=failed,
                    )
                )
            cells[condition] = CellStats(runs=tuple(runs))
        rows.append(ModelResult(model=model_key, size_class=spec.size_class, cells=cells))
    return DetectionResults(rows=rows)


# ---------------------------------------------------------------------------
# Moderation-score comparison


@dataclass(frozen=True)
class ModerationScore:
    message_id: str
    dimension: str
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("moderation scores lie within [0, 1]")


class ModerationTransport(Protocol):
    def score_text(self, text: str) -> dict[str, float]: ...


class HttpModerationTransport:
    """POSTs text to a moderation endpoint and returns its dimension scores."""

    def __init__(
        self,
        endpoint_url: str,
        credential_env: str = "LOOPWRIGHT_MODERATION_TOKEN",
        timeout: float = 30.0,
    ):
        self._url = endpoint_url
        self._credential_env = credential_env
        self._client = httpx.Client(timeout=timeout)

    def score_text(self, text: str) -> dict[str, float]:
        headers = {}
        token = os.environ.get(self._credential_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = self._client.post(
                self._url, json={"input": text}, headers=headers
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise EndpointUnavailable(f"{self._url}: {exc}") from exc
        body = response.json()
        if "scores" in body:
            return {k: float(v) for k, v in body["scores"].items()}
        try:
            return {
                k: float(v)
                for k, v in body["results"][0]["category_scores"].items()
            }
        except (KeyError, IndexError, TypeError) as exc:
            raise EndpointUnavailable(
                f"{self._url}: unrecognized response shape"
            ) from exc


def _moderation_text(dataset: Dataset, message_id: str) -> str:
    message = dataset.message(message_id)
    if message.raw_text:
        return message.raw_text
    return reconstruct_message(message.claims_in_order(), None, with_cw=False)


def fetch_moderation_scores(
    dataset: Dataset,
    transport: ModerationTransport,
    cache_dir: str | Path,
) -> list[ModerationScore]:
    """Score every message once, caching responses by content hash.

    Replays never re-call the endpoint; an endpoint failure mid-batch leaves
    the already-fetched scores in the cache and reports how far it got.
    """
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    scores: list[ModerationScore] = []
    completed = 0
    for message in sorted(dataset.messages, key=lambda m: m.message_id):
        text = _moderation_text(dataset, message.message_id)
        key = hashlib.sha256(text.encode("utf-8")).hexdigest()
        cache_file = cache / f"{key}.json"
        if cache_file.exists():
            dimensions = json.loads(cache_file.read_text(encoding="utf-8"))["dimensions"]
        else:
            try:
                dimensions = transport.score_text(text)
            except EndpointUnavailable as exc:
                raise EndpointUnavailable(
                    f"{exc}; {completed} messages fetched before the failure, "
                    f"resume from {message.message_id}"
                ) from exc
            cache_file.write_text(
                canonical_json({"dimensions": dimensions}) + "\n", encoding="utf-8"
            )
        for dimension, value in sorted(dimensions.items()):
            scores.append(
                ModerationScore(
                    message_id=message.message_id,
                    dimension=dimension,
                    score=float(value),
                )
            )
        completed += 1
    return scores


@dataclass(frozen=True)
class DimensionComparison:
    """One moderation dimension's group comparison with the group means."""

    dimension: str
    mean_without_cfs: float
    mean_with_cfs: float
    comparison: GroupComparison

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "mean_without_cfs": self.mean_without_cfs,
            "mean_with_cfs": self.mean_with_cfs,
            **self.comparison.to_dict(),
        }


def moderation_compare(
    dataset: Dataset,
    scores: Sequence[ModerationScore],
    cw_labels: Mapping[str, CWLabel],
    *,
    mean_threshold: float = 0.1,
    method: str = "auto",
) -> list[DimensionComparison]:
    """Compare moderation scores between HS messages with and without CFS claims.

    Only dimensions whose pooled mean over all HS messages exceeds the
    threshold are compared; the partition is total and disjoint.
    """
    hs_messages = [
        m
        for m in sorted(dataset.messages, key=lambda m: m.message_id)
        if m.hs_label is HSLabel.HATEFUL
    ]
    if not hs_messages:
        raise LoopwrightError("the corpus has no hateful messages to compare")
    lookup: dict[tuple[str, str], float] = {}
    dimensions: set[str] = set()
    for s in scores:
        lookup[(s.message_id, s.dimension)] = s.score
        dimensions.add(s.dimension)

    def has_cfs(message) -> bool:
        return any(
            cw_labels.get(c.claim_id) is CWLabel.CFS for c in message.claims
        )

    without_group = [m.message_id for m in hs_messages if not has_cfs(m)]
    with_group = [m.message_id for m in hs_messages if has_cfs(m)]
    if not without_group or not with_group:
        raise LoopwrightError(
            "one CFS-presence group is empty; nothing to compare "
            f"(w/o={len(without_group)}, w/={len(with_group)})"
        )

    results: list[DimensionComparison] = []
    for dimension in sorted(dimensions):
        missing = [
            m.message_id
            for m in hs_messages
            if (m.message_id, dimension) not in lookup
        ]
        if missing:
            raise MissingScores(
                f"dimension {dimension!r} lacks scores for {len(missing)} HS "
                f"messages, e.g. {missing[:5]}"
            )
        pooled = [lookup[(m.message_id, dimension)] for m in hs_messages]
        if statistics.fmean(pooled) <= mean_threshold:
            continue
        scores_without = [lookup[(mid, dimension)] for mid in without_group]
        scores_with = [lookup[(mid, dimension)] for mid in with_group]
        results.append(
            DimensionComparison(
                dimension=dimension,
                mean_without_cfs=statistics.fmean(scores_without),
                mean_with_cfs=statistics.fmean(scores_with),
                comparison=compare_groups(
                    "HS messages w/o CFS claims",
                    scores_without,
                    "HS messages w/ CFS claims",
                    scores_with,
                    method=method,
                ),
            )
        )
    return results
