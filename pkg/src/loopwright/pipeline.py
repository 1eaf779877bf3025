"""The annotation loop: parallel human/LLM labels, routing, blind adjudication.

Each claim flows sample -> vote -> reconcile -> (judge) -> final label. Every
step is appended to a run event log, so an interrupted batch resumes without
re-calling model endpoints and a finished run can be replayed into the exact
same report.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

from .errors import EndpointUnavailable, LoopwrightError, OutputNeverValid
from .gateway import AuditLog, ModelSpec, Transport, sample_triple
from .judging import JudgeCase, adjudicate, derive_subseed, make_judge_case
from .labels import CWLabel, PromptMode, ProvenanceCategory
from .metrics import VariabilityRow, variability_table
from .prompts import build_cw_prompt
from .records import FinalLabelRecord, TripleRun
from .store import Dataset, EventLog, canonical_json
from .voting import JudgeReason, RoutingDecision, majority_vote, reconcile

# Judge interaction contract: receives the blind case plus the human/LLM
# split (infrastructure needs the split to route and account; the human judge
# behind the provider only ever sees the case's wire payload).
JudgeProvider = Callable[[JudgeCase, CWLabel, "CWLabel | None"], CWLabel]


def batch_judge(labels: Mapping[str, CWLabel]) -> JudgeProvider:
    """Judge provider backed by a pre-recorded label file."""

    def provide(
        case: JudgeCase, human: CWLabel, llm_majority: CWLabel | None
    ) -> CWLabel:
        try:
            return labels[case.claim_id]
        except KeyError:
            raise LoopwrightError(
                f"judge file has no label for claim {case.claim_id}"
            ) from None

    return provide


# ---------------------------------------------------------------------------
# Effort accounting


@dataclass(frozen=True)
class StratumEffort:
    total: int
    judged: int
    judged_percent: float


@dataclass(frozen=True)
class EffortReport:
    """How much adjudication the loop required and how it was resolved.

    Judged/accepted percentages are over all claims; the sided/override/
    independent percentages are over the judged claims.
    """

    total_claims: int
    accepted: int
    judged_count: int
    judged_percent: float
    sided_human: int
    sided_human_percent: float
    sided_llm: int
    sided_llm_percent: float
    override: int
    override_percent: float
    independent: int
    independent_percent: float
    strata: Mapping[str, StratumEffort]

    def to_dict(self) -> dict:
        return {
            "total_claims": self.total_claims,
            "accepted": self.accepted,
            "judged_count": self.judged_count,
            "judged_percent": self.judged_percent,
            "sided_human": self.sided_human,
            "sided_human_percent": self.sided_human_percent,
            "sided_llm": self.sided_llm,
            "sided_llm_percent": self.sided_llm_percent,
            "override": self.override,
            "override_percent": self.override_percent,
            "independent": self.independent,
            "independent_percent": self.independent_percent,
            "strata": {
                name: {
                    "total": s.total,
                    "judged": s.judged,
                    "judged_percent": s.judged_percent,
                }
                for name, s in sorted(self.strata.items())
            },
        }


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def effort_report(
    finals: list[FinalLabelRecord], strata: Mapping[str, str]
) -> EffortReport:
    """Aggregate provenance counts; ``strata`` maps claim ids to stratum names."""
    by_provenance = {category: 0 for category in ProvenanceCategory}
    judged_by_stratum: dict[str, int] = {}
    total_by_stratum: dict[str, int] = {}
    for claim_id, name in strata.items():
        total_by_stratum[name] = total_by_stratum.get(name, 0) + 1
    for record in finals:
        by_provenance[record.provenance] += 1
        if record.provenance is not ProvenanceCategory.ACCEPTED:
            name = strata.get(record.claim_id, "unstratified")
            judged_by_stratum[name] = judged_by_stratum.get(name, 0) + 1
    total = len(strata)
    accepted = by_provenance[ProvenanceCategory.ACCEPTED]
    sided_human = by_provenance[ProvenanceCategory.JUDGE_SIDED_HUMAN]
    sided_llm = by_provenance[ProvenanceCategory.JUDGE_SIDED_LLM]
    override = by_provenance[ProvenanceCategory.JUDGE_OVERRIDE]
    independent = by_provenance[ProvenanceCategory.JUDGE_INDEPENDENT]
    judged = sided_human + sided_llm + override + independent
    return EffortReport(
        total_claims=total,
        accepted=accepted,
        judged_count=judged,
        judged_percent=_pct(judged, total),
        sided_human=sided_human,
        sided_human_percent=_pct(sided_human, judged),
        sided_llm=sided_llm,
        sided_llm_percent=_pct(sided_llm, judged),
        override=override,
        override_percent=_pct(override, judged),
        independent=independent,
        independent_percent=_pct(independent, judged),
        strata={
            name: StratumEffort(
                total=total_by_stratum.get(name, 0),
                judged=judged_by_stratum.get(name, 0),
                judged_percent=_pct(
                    judged_by_stratum.get(name, 0), total_by_stratum.get(name, 0)
                ),
            )
            for name in sorted(total_by_stratum)
        },
    )


# ---------------------------------------------------------------------------
# Per-claim state folded from the event log


@dataclass
class _ClaimState:
    triple: TripleRun | None = None
    human: CWLabel | None = None
    decision: RoutingDecision | None = None
    case: JudgeCase | None = None
    judge_label: CWLabel | None = None
    final: FinalLabelRecord | None = None
    error: str | None = None

    @property
    def complete(self) -> bool:
        return self.final is not None


@dataclass
class PipelineReport:
    """Everything one run produced, in dataset claim order."""

    model: str
    mode: PromptMode
    seed: int
    triples: dict[str, TripleRun]
    routings: dict[str, RoutingDecision]
    judge_labels: dict[str, CWLabel]
    finals: list[FinalLabelRecord]
    failed: dict[str, str]
    effort: EffortReport
    variability: list[VariabilityRow] = field(default_factory=list)

    def finals_bytes(self) -> bytes:
        """Canonical serialization used for replay-identity checks."""
        lines = [canonical_json(record.to_dict()) for record in self.finals]
        return ("\n".join(lines) + "\n").encode("utf-8")


def _fold_events(events: list[dict]) -> dict[str, _ClaimState]:
    states: dict[str, _ClaimState] = {}

    def state_of(claim_id: str) -> _ClaimState:
        return states.setdefault(claim_id, _ClaimState())

    for event in events:
        kind = event.get("kind")
        if kind == "claim_triple":
            st = state_of(event["claim_id"])
            st.triple = TripleRun.from_dict(event["triple"])
            st.error = None
        elif kind == "claim_routing":
            st = state_of(event["claim_id"])
            st.human = CWLabel(event["human"])
            st.decision = RoutingDecision.from_dict(event["decision"])
        elif kind == "claim_judge_case":
            st = state_of(event["claim_id"])
            st.case = JudgeCase(
                claim_id=event["claim_id"],
                claim_text=event["claim_text"],
                presented_labels=tuple(CWLabel(l) for l in event["presented"]),
                permutation_seed=event["seed"],
            )
        elif kind == "claim_adjudication":
            state_of(event["claim_id"]).judge_label = CWLabel(event["judge_label"])
        elif kind == "claim_final":
            st = state_of(event["claim_id"])
            st.final = FinalLabelRecord.from_dict(event["final"])
            st.error = None
        elif kind == "claim_failed":
            state_of(event["claim_id"]).error = event["error"]
    return states


def _assemble_report(
    dataset: Dataset,
    states: Mapping[str, _ClaimState],
    model: str,
    mode: PromptMode,
    seed: int,
) -> PipelineReport:
    triples: dict[str, TripleRun] = {}
    routings: dict[str, RoutingDecision] = {}
    judge_labels: dict[str, CWLabel] = {}
    finals: list[FinalLabelRecord] = []
    failed: dict[str, str] = {}
    for claim in dataset.claims_in_order():
        st = states.get(claim.claim_id)
        if st is None:
            continue
        if st.triple is not None:
            triples[claim.claim_id] = st.triple
        if st.decision is not None:
            routings[claim.claim_id] = st.decision
        if st.judge_label is not None:
            judge_labels[claim.claim_id] = st.judge_label
        if st.final is not None:
            finals.append(st.final)
        elif st.error is not None:
            failed[claim.claim_id] = st.error
    strata = dataset.hs_strata()
    return PipelineReport(
        model=model,
        mode=mode,
        seed=seed,
        triples=triples,
        routings=routings,
        judge_labels=judge_labels,
        finals=finals,
        failed=failed,
        effort=effort_report(finals, strata),
        variability=variability_table(triples.values(), strata),
    )


# ---------------------------------------------------------------------------
# The run itself


def run_pipeline(
    dataset: Dataset,
    model: ModelSpec,
    mode: PromptMode,
    human_labels: Mapping[str, CWLabel],
    judge: JudgeProvider | Mapping[str, CWLabel],
    transport: Transport,
    run_dir: str | Path,
    *,
    seed: int = 0,
    resume: bool = False,
    max_workers: int = 4,
    audit: AuditLog | None = None,
    human_id: str = "annotator1",
    judge_id: str = "judge",
) -> PipelineReport:
    """Process every claim of the dataset through the loop.

    Gateway failures are isolated per claim: the claim is reported as failed
    and the batch continues. A second call with ``resume=True`` picks up the
    persisted state and never re-samples claims that already have a triple.
    """
    claims = dataset.claims_in_order()
    missing_human = [c.claim_id for c in claims if c.claim_id not in human_labels]
    if missing_human:
        raise LoopwrightError(
            f"{len(missing_human)} claims lack a first-annotator label, "
            f"e.g. {missing_human[:5]}"
        )
    judge_fn = judge if callable(judge) else batch_judge(judge)

    log = EventLog(Path(run_dir) / "events.log", kind="pipeline_run")
    if log.exists():
        if not resume:
            raise FileExistsError(
                f"run directory already holds a log: {log.path}; pass resume=True"
            )
        header, events = log.read()
        if (
            header.get("model") != model.registry_key
            or header.get("mode") != mode.value
            or header.get("seed") != seed
        ):
            raise LoopwrightError(
                "resume configuration does not match the recorded run header"
            )
        states = _fold_events(events)
    else:
        log.initialize(
            {
                "model": model.registry_key,
                "mode": mode.value,
                "seed": seed,
                "total_claims": len(claims),
                "human_id": human_id,
                "judge_id": judge_id,
            }
        )
        states = {}

    log_lock = threading.Lock()

    def emit(event: dict) -> None:
        stamped = dict(event)
        stamped["ts"] = (
            datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")
        )
        with log_lock:
            log.append(stamped)

    def process(claim_id: str) -> None:
        claim = dataset.claim(claim_id)
        st = states.setdefault(claim_id, _ClaimState())
        human = human_labels[claim_id]
        try:
            if st.triple is None:
                prompt = build_cw_prompt(claim.text, mode)
                st.triple = sample_triple(
                    model, prompt, claim_id, transport, mode=mode, audit=audit
                )
                emit(
                    {
                        "kind": "claim_triple",
                        "claim_id": claim_id,
                        "triple": st.triple.to_dict(),
                    }
                )
            if st.decision is None:
                st.human = human
                st.decision = reconcile(human, st.triple)
                emit(
                    {
                        "kind": "claim_routing",
                        "claim_id": claim_id,
                        "human": human.value,
                        "decision": st.decision.to_dict(),
                    }
                )
            if st.decision.is_accepted:
                st.final = FinalLabelRecord(
                    claim_id=claim_id,
                    gold=st.decision.label,
                    provenance=ProvenanceCategory.ACCEPTED,
                )
                emit(
                    {
                        "kind": "claim_final",
                        "claim_id": claim_id,
                        "final": st.final.to_dict(),
                    }
                )
                return
            llm_majority = (
                None
                if st.decision.reason is JudgeReason.NO_MAJORITY
                else majority_vote(st.triple)
            )
            if st.case is None:
                st.case = make_judge_case(
                    claim_id,
                    claim.text,
                    human,
                    llm_majority,
                    derive_subseed(seed, claim_id),
                )
                emit(
                    {
                        "kind": "claim_judge_case",
                        "claim_id": claim_id,
                        "claim_text": st.case.claim_text,
                        "presented": [l.value for l in st.case.presented_labels],
                        "seed": st.case.permutation_seed,
                    }
                )
            if st.judge_label is None:
                st.judge_label = judge_fn(st.case, human, llm_majority)
                emit(
                    {
                        "kind": "claim_adjudication",
                        "claim_id": claim_id,
                        "judge_label": st.judge_label.value,
                    }
                )
            st.final = adjudicate(st.case, human, llm_majority, st.judge_label)
            emit(
                {
                    "kind": "claim_final",
                    "claim_id": claim_id,
                    "final": st.final.to_dict(),
                }
            )
        except (EndpointUnavailable, OutputNeverValid) as exc:
            st.error = str(exc)
            emit({"kind": "claim_failed", "claim_id": claim_id, "error": st.error})

    pending = [c.claim_id for c in claims if not states.get(c.claim_id, _ClaimState()).complete]
    if max_workers <= 1:
        for claim_id in pending:
            process(claim_id)
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(process, pending))

    failures = sum(1 for st in states.values() if st.error is not None)
    emit({"kind": "run_completed", "failed": failures})
    return _assemble_report(dataset, states, model.registry_key, mode, seed)


def replay_run(run_dir: str | Path, dataset: Dataset) -> PipelineReport:
    """Reconstruct a report purely from the persisted event log."""
    log = EventLog(Path(run_dir) / "events.log", kind="pipeline_run")
    header, events = log.read()
    states = _fold_events(events)
    return _assemble_report(
        dataset,
        states,
        header.get("model", "unknown"),
        PromptMode(header.get("mode", "zero")),
        header.get("seed", 0),
    )


# ---------------------------------------------------------------------------
# Fully human (platinum) pipeline


@dataclass(frozen=True)
class PlatinumReport:
    """Outcome of the three-annotator pipeline with a fourth tie-breaking judge."""

    finals: dict[str, CWLabel]
    all_agree: int
    two_agree: int
    judged: int

    @property
    def judged_percent(self) -> float:
        return _pct(self.judged, len(self.finals))


def run_platinum(
    annotations: Mapping[str, Mapping[str, CWLabel]],
    judge: JudgeProvider | Mapping[str, CWLabel],
    claim_texts: Mapping[str, str] | None = None,
) -> PlatinumReport:
    """Aggregate exactly three human annotators by majority; ties go to a judge.

    The judge case for a three-way tie presents the first annotator's label
    only, mirroring the no-majority path of the main loop.
    """
    if len(annotations) != 3:
        raise LoopwrightError("the platinum pipeline takes exactly 3 annotators")
    judge_fn = judge if callable(judge) else batch_judge(judge)
    annotator_ids = sorted(annotations)
    claim_ids = set()
    for labels in annotations.values():
        claim_ids.update(labels)
    for annotator_id, labels in annotations.items():
        missing = claim_ids - set(labels)
        if missing:
            raise LoopwrightError(
                f"annotator {annotator_id} is missing {len(missing)} claims"
            )

    finals: dict[str, CWLabel] = {}
    all_agree = two_agree = judged = 0
    for claim_id in sorted(claim_ids):
        labels = [annotations[a][claim_id] for a in annotator_ids]
        distinct = len(set(labels))
        winner = majority_vote(tuple(labels)) if distinct < 3 else None
        if winner is not None:
            finals[claim_id] = winner
            if distinct == 1:
                all_agree += 1
            else:
                two_agree += 1
        else:
            judged += 1
            case = JudgeCase(
                claim_id=claim_id,
                claim_text=(claim_texts or {}).get(claim_id, ""),
                presented_labels=(labels[0],),
                permutation_seed=0,
            )
            finals[claim_id] = judge_fn(case, labels[0], None)
    return PlatinumReport(
        finals=finals, all_agree=all_agree, two_agree=two_agree, judged=judged
    )
