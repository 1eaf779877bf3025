"""HTTP service: task queues with exclusive leases, blind judging, live stats.

All annotation logic (routing, adjudication precedence, blindness) lives
server-side; clients only see task payloads and submit labels. Lease table
mutations are serialized per project, which makes assignment linearizable.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable, Mapping

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .errors import (
    DuplicateAnnotation,
    InconsistentCase,
    LeaseExpired,
    LoopwrightError,
    NotLeaseHolder,
    Unauthorized,
    WrongLabelSpace,
)
from .judging import JudgeCase, adjudicate, make_judge_case
from .labels import AnnotatorKind, CWLabel, PromptMode
from .metrics import variability_table
from .pipeline import effort_report
from .records import (
    AnnotationEvent,
    AnnotatorRef,
    FinalLabelRecord,
    MessageRecord,
    TripleRun,
    validate_message,
)
from .store import AnnotationEventStore, Dataset

DEFAULT_LEASE_TTL_SECONDS = 30 * 60.0


class Role(Enum):
    FIRST_ANNOTATOR = "first_annotator"
    JUDGE = "judge"
    OPERATOR = "operator"


@dataclass
class Lease:
    assignee: AnnotatorRef
    expires_at: float


@dataclass
class Task:
    task_id: str
    claim_id: str
    role: Role
    sequence: int
    payload: dict
    hidden: dict = dc_field(default_factory=dict)
    done: bool = False
    lease: Lease | None = None


@dataclass
class TokenGrant:
    ref: AnnotatorRef
    roles: frozenset[Role]


class Project:
    def __init__(
        self,
        project_id: str,
        dataset: Dataset,
        tokens: Mapping[str, TokenGrant],
        lease_ttl_seconds: float = DEFAULT_LEASE_TTL_SECONDS,
        include_message_context: bool = False,
    ):
        self.project_id = project_id
        self.dataset = dataset
        self.tokens = dict(tokens)
        self.lease_ttl_seconds = lease_ttl_seconds
        self.include_message_context = include_message_context
        self.lock = threading.Lock()
        self.tasks: dict[str, Task] = {}
        self._sequence = 0
        self.events = AnnotationEventStore()
        self.finals: dict[str, FinalLabelRecord] = {}
        self.triples: list[TripleRun] = []

    def next_sequence(self) -> int:
        self._sequence += 1
        return self._sequence


class AnnotationService:
    """In-memory multi-project backend; the FastAPI app is a thin shell on top."""

    def __init__(self, clock: Callable[[], float] = time.monotonic):
        self.clock = clock
        self.projects: dict[str, Project] = {}
        self.task_index: dict[str, str] = {}
        self._registry_lock = threading.Lock()

    # -- project lifecycle ---------------------------------------------------

    def create_project(
        self,
        project_id: str,
        messages: list[dict],
        tokens: Mapping[str, dict],
        *,
        lease_ttl_seconds: float = DEFAULT_LEASE_TTL_SECONDS,
        include_message_context: bool = False,
        first_annotator_tasks: bool = True,
    ) -> Project:
        records = []
        for obj in messages:
            message = MessageRecord.from_dict(obj)
            report = validate_message(message)
            if not report.ok:
                raise LoopwrightError(
                    f"message {message.message_id}: " + "; ".join(report.errors)
                )
            records.append(message)
        grants = {
            token: TokenGrant(
                ref=AnnotatorRef(
                    AnnotatorKind(spec.get("kind", "human")), spec["identifier"]
                ),
                roles=frozenset(Role(r) for r in spec.get("roles", ["first_annotator"])),
            )
            for token, spec in tokens.items()
        }
        project = Project(
            project_id,
            Dataset(tuple(records)),
            grants,
            lease_ttl_seconds=lease_ttl_seconds,
            include_message_context=include_message_context,
        )
        with self._registry_lock:
            if project_id in self.projects:
                raise LoopwrightError(f"project already exists: {project_id}")
            self.projects[project_id] = project
        if first_annotator_tasks:
            with project.lock:
                for claim in project.dataset.claims_in_order():
                    self._add_task(
                        project,
                        claim_id=claim.claim_id,
                        role=Role.FIRST_ANNOTATOR,
                        payload={"claim_text": claim.text},
                    )
        return project

    def _add_task(
        self, project: Project, claim_id: str, role: Role, payload: dict, hidden: dict | None = None
    ) -> Task:
        task = Task(
            task_id=uuid.uuid4().hex,
            claim_id=claim_id,
            role=role,
            sequence=project.next_sequence(),
            payload=payload,
            hidden=hidden or {},
        )
        project.tasks[task.task_id] = task
        self.task_index[task.task_id] = project.project_id
        return task

    def project(self, project_id: str) -> Project:
        try:
            return self.projects[project_id]
        except KeyError:
            raise LoopwrightError(f"unknown project: {project_id}") from None

    def authenticate(self, project: Project, token: str | None) -> TokenGrant:
        if token is None or token not in project.tokens:
            raise Unauthorized("unknown or missing bearer token")
        return project.tokens[token]

    # -- queue operations ----------------------------------------------------

    def lease_next(self, project: Project, role: Role, grant: TokenGrant) -> Task | None:
        if role not in grant.roles:
            raise Unauthorized(f"token does not grant the {role.value} role")
        now = self.clock()
        with project.lock:
            candidates = sorted(
                (
                    t
                    for t in project.tasks.values()
                    if t.role is role
                    and not t.done
                    and (t.lease is None or t.lease.expires_at <= now)
                ),
                key=lambda t: t.sequence,
            )
            if not candidates:
                return None
            task = candidates[0]
            task.lease = Lease(
                assignee=grant.ref, expires_at=now + project.lease_ttl_seconds
            )
            return task

    def release(self, project: Project, task_id: str, grant: TokenGrant) -> None:
        with project.lock:
            task = project.tasks.get(task_id)
            if task is None:
                raise LoopwrightError(f"unknown task: {task_id}")
            if task.lease is None or task.lease.assignee != grant.ref:
                raise NotLeaseHolder("only the lease holder can release a task")
            task.lease = None

    def submit(
        self, project: Project, task_id: str, grant: TokenGrant, label_raw: str
    ) -> dict:
        now = self.clock()
        with project.lock:
            task = project.tasks.get(task_id)
            if task is None:
                raise LoopwrightError(f"unknown task: {task_id}")
            if task.done:
                raise NotLeaseHolder("task already completed")
            if task.lease is None or task.lease.assignee != grant.ref:
                raise NotLeaseHolder("caller does not hold the lease")
            if task.lease.expires_at <= now:
                task.lease = None
                raise LeaseExpired("the lease TTL elapsed; the task was requeued")
            try:
                label = CWLabel(label_raw)
            except ValueError:
                raise WrongLabelSpace(
                    f"label {label_raw!r} is not a check-worthiness label"
                ) from None

            if task.role is Role.FIRST_ANNOTATOR:
                project.events.insert(
                    AnnotationEvent(
                        claim_id=task.claim_id,
                        source=grant.ref,
                        label=label,
                        run_index=0,
                        prompt_mode=PromptMode.NOT_APPLICABLE,
                    )
                )
                task.done = True
                task.lease = None
                return {"status": "recorded"}

            # Judge path: adjudication is final.
            case = JudgeCase(
                claim_id=task.claim_id,
                claim_text=task.payload["claim_text"],
                presented_labels=tuple(
                    CWLabel(l) for l in task.payload["labels"]
                ),
                permutation_seed=task.hidden["seed"],
            )
            human = CWLabel(task.hidden["human"])
            llm_raw = task.hidden.get("llm_majority")
            llm = CWLabel(llm_raw) if llm_raw else None
            final = adjudicate(case, human, llm, label)
            project.finals[task.claim_id] = final
            project.events.insert(
                AnnotationEvent(
                    claim_id=task.claim_id,
                    source=grant.ref,
                    label=label,
                    run_index=0,
                    prompt_mode=PromptMode.NOT_APPLICABLE,
                )
            )
            task.done = True
            task.lease = None
            return {"status": "adjudicated", "final": final.to_dict()}

    def push_judge_cases(self, project: Project, cases: list[dict]) -> list[str]:
        created: list[str] = []
        with project.lock:
            for spec in cases:
                claim_id = spec["claim_id"]
                claim = project.dataset.claim(claim_id)
                human = CWLabel(spec["human"])
                llm_raw = spec.get("llm_majority")
                llm = CWLabel(llm_raw) if llm_raw else None
                seed = int(spec.get("seed", 0))
                case = make_judge_case(claim_id, claim.text, human, llm, seed)
                payload = dict(case.wire_payload())
                payload.pop("claim_id", None)
                if project.include_message_context:
                    payload["message_text"] = self._message_text(project, claim_id)
                task = self._add_task(
                    project,
                    claim_id=claim_id,
                    role=Role.JUDGE,
                    payload=payload,
                    hidden={
                        "human": human.value,
                        "llm_majority": llm.value if llm else None,
                        "seed": seed,
                    },
                )
                created.append(task.task_id)
        return created

    @staticmethod
    def _message_text(project: Project, claim_id: str) -> str:
        message = project.dataset.message_of(claim_id)
        if message.raw_text:
            return message.raw_text
        return " ".join(c.text for c in message.claims_in_order())

    def register_triples(self, project: Project, triples: list[dict]) -> int:
        with project.lock:
            for obj in triples:
                project.triples.append(TripleRun.from_dict(obj))
            return len(project.triples)

    def stats(self, project: Project) -> dict:
        now = self.clock()
        with project.lock:
            per_role: dict[str, dict[str, int]] = {}
            for role in (Role.FIRST_ANNOTATOR, Role.JUDGE):
                tasks = [t for t in project.tasks.values() if t.role is role]
                leased = sum(
                    1
                    for t in tasks
                    if not t.done and t.lease is not None and t.lease.expires_at > now
                )
                done = sum(1 for t in tasks if t.done)
                per_role[role.value] = {
                    "total": len(tasks),
                    "pending": len(tasks) - leased - done,
                    "leased": leased,
                    "done": done,
                }
            finals = list(project.finals.values())
            strata = project.dataset.hs_strata()
            total_claims = len(strata)
            effort = effort_report(finals, strata) if finals else None
            rows = variability_table(project.triples, strata) if project.triples else None
            return {
                "project_id": project.project_id,
                "total_claims": total_claims,
                "tasks": per_role,
                "finals": len(finals),
                "completion_percent": (
                    100.0 * len(finals) / total_claims if total_claims else 0.0
                ),
                "effort": effort.to_dict() if effort else None,
                "variability": (
                    [
                        {
                            "stratum": row.stratum,
                            "total": row.total,
                            "counts": {c.value: n for c, n in row.counts.items()},
                            "percents": {c.value: p for c, p in row.percents.items()},
                        }
                        for row in rows
                    ]
                    if rows
                    else None
                ),
            }

    def export(self, project: Project) -> dict:
        with project.lock:
            return {
                "project_id": project.project_id,
                "gold": [
                    project.finals[claim_id].to_dict()
                    for claim_id in sorted(project.finals)
                ],
                "annotations": [e.to_dict() for e in project.events.events()],
            }


# ---------------------------------------------------------------------------
# FastAPI layer


class CreateProjectBody(BaseModel):
    project_id: str
    messages: list[dict]
    tokens: dict[str, dict]
    lease_ttl_seconds: float = DEFAULT_LEASE_TTL_SECONDS
    include_message_context: bool = False
    first_annotator_tasks: bool = True


class SubmitBody(BaseModel):
    label: str


class JudgeCasesBody(BaseModel):
    cases: list[dict]


class TriplesBody(BaseModel):
    triples: list[dict]


class LeaseView(BaseModel):
    task_id: str
    claim_id: str
    role: str
    expires_in_seconds: float = Field(ge=0)
    payload: dict


_ERROR_STATUS: tuple[tuple[type[Exception], int, str], ...] = (
    (Unauthorized, 401, "unauthorized"),
    (NotLeaseHolder, 403, "not_lease_holder"),
    (LeaseExpired, 409, "lease_expired"),
    (WrongLabelSpace, 409, "wrong_label_space"),
    (DuplicateAnnotation, 409, "duplicate_annotation"),
    (InconsistentCase, 409, "inconsistent_case"),
    (LoopwrightError, 404, "not_found"),
)


def create_app(service: AnnotationService | None = None) -> FastAPI:
    service = service or AnnotationService()
    app = FastAPI(title="loopwright annotation service")
    app.state.service = service

    def bearer_token(authorization: str | None = Header(default=None)) -> str | None:
        if authorization and authorization.lower().startswith("bearer "):
            return authorization[7:]
        return None

    @app.exception_handler(LoopwrightError)
    async def handle_domain_error(request: Request, exc: LoopwrightError):
        for exc_type, status, code in _ERROR_STATUS:
            if isinstance(exc, exc_type):
                return JSONResponse(
                    status_code=status, content={"code": code, "message": str(exc)}
                )
        return JSONResponse(
            status_code=500, content={"code": "internal", "message": str(exc)}
        )

    @app.post("/projects", status_code=201)
    def create_project(body: CreateProjectBody) -> dict:
        project = service.create_project(
            body.project_id,
            body.messages,
            body.tokens,
            lease_ttl_seconds=body.lease_ttl_seconds,
            include_message_context=body.include_message_context,
            first_annotator_tasks=body.first_annotator_tasks,
        )
        return {
            "project_id": project.project_id,
            "claims": len(project.dataset.claims_in_order()),
        }

    @app.get("/tasks/next")
    def lease_next(
        project: str = Query(...),
        role: Role = Query(...),
        token: str | None = Depends(bearer_token),
    ):
        proj = service.project(project)
        grant = service.authenticate(proj, token)
        task = service.lease_next(proj, role, grant)
        if task is None:
            return Response(status_code=204)
        return LeaseView(
            task_id=task.task_id,
            claim_id=task.claim_id,
            role=task.role.value,
            expires_in_seconds=max(task.lease.expires_at - service.clock(), 0.0),
            payload=task.payload,
        )

    @app.post("/tasks/{task_id}/submit")
    def submit(
        task_id: str, body: SubmitBody, token: str | None = Depends(bearer_token)
    ) -> dict:
        project_id = service.task_index.get(task_id)
        if project_id is None:
            raise LoopwrightError(f"unknown task: {task_id}")
        proj = service.project(project_id)
        grant = service.authenticate(proj, token)
        return service.submit(proj, task_id, grant, body.label)

    @app.post("/tasks/{task_id}/release")
    def release(task_id: str, token: str | None = Depends(bearer_token)) -> dict:
        project_id = service.task_index.get(task_id)
        if project_id is None:
            raise LoopwrightError(f"unknown task: {task_id}")
        proj = service.project(project_id)
        grant = service.authenticate(proj, token)
        service.release(proj, task_id, grant)
        return {"status": "released"}

    @app.get("/projects/{project_id}/stats")
    def stats(project_id: str, token: str | None = Depends(bearer_token)) -> dict:
        proj = service.project(project_id)
        service.authenticate(proj, token)
        return service.stats(proj)

    @app.get("/projects/{project_id}/export")
    def export(project_id: str, token: str | None = Depends(bearer_token)) -> dict:
        proj = service.project(project_id)
        service.authenticate(proj, token)
        return service.export(proj)

    @app.get("/projects/{project_id}/finals")
    def finals(
        project_id: str,
        claim_id: str | None = Query(default=None),
        token: str | None = Depends(bearer_token),
    ) -> dict:
        proj = service.project(project_id)
        service.authenticate(proj, token)
        with proj.lock:
            if claim_id is not None:
                record = proj.finals.get(claim_id)
                return {"finals": [record.to_dict()] if record else []}
            return {
                "finals": [proj.finals[c].to_dict() for c in sorted(proj.finals)]
            }

    @app.post("/projects/{project_id}/judge-cases", status_code=201)
    def push_judge_cases(
        project_id: str,
        body: JudgeCasesBody,
        token: str | None = Depends(bearer_token),
    ) -> dict:
        proj = service.project(project_id)
        grant = service.authenticate(proj, token)
        if Role.OPERATOR not in grant.roles:
            raise Unauthorized("pushing judge cases requires the operator role")
        task_ids = service.push_judge_cases(proj, body.cases)
        return {"task_ids": task_ids}

    @app.post("/projects/{project_id}/triples")
    def register_triples(
        project_id: str,
        body: TriplesBody,
        token: str | None = Depends(bearer_token),
    ) -> dict:
        proj = service.project(project_id)
        grant = service.authenticate(proj, token)
        if Role.OPERATOR not in grant.roles:
            raise Unauthorized("registering runs requires the operator role")
        total = service.register_triples(proj, body.triples)
        return {"triples": total}

    return app


class ServiceJudgeClient:
    """Judge provider that forwards cases to a running service and waits.

    ``client`` is any httpx-compatible client (the test client works too);
    judge labels are produced by human adjudicators on the other side. Usable
    directly as a pipeline judge provider.
    """

    def __init__(
        self,
        client,
        project_id: str,
        operator_token: str,
        poll_interval: float = 0.5,
        timeout: float = 3600.0,
    ):
        self._client = client
        self._project_id = project_id
        self._headers = {"Authorization": f"Bearer {operator_token}"}
        self._poll_interval = poll_interval
        self._timeout = timeout

    def __call__(
        self, case: JudgeCase, human: CWLabel, llm_majority: CWLabel | None
    ) -> CWLabel:
        self.push_case(case.claim_id, human, llm_majority, case.permutation_seed)
        return self.wait_for_final(case.claim_id).gold

    def push_case(
        self, claim_id: str, human: CWLabel, llm_majority: CWLabel | None, seed: int
    ) -> None:
        response = self._client.post(
            f"/projects/{self._project_id}/judge-cases",
            json={
                "cases": [
                    {
                        "claim_id": claim_id,
                        "human": human.value,
                        "llm_majority": llm_majority.value if llm_majority else None,
                        "seed": seed,
                    }
                ]
            },
            headers=self._headers,
        )
        response.raise_for_status()

    def wait_for_final(self, claim_id: str) -> FinalLabelRecord:
        deadline = time.monotonic() + self._timeout
        while time.monotonic() < deadline:
            response = self._client.get(
                f"/projects/{self._project_id}/finals",
                params={"claim_id": claim_id},
                headers=self._headers,
            )
            response.raise_for_status()
            finals = response.json()["finals"]
            if finals:
                return FinalLabelRecord.from_dict(finals[0])
            time.sleep(self._poll_interval)
        raise TimeoutError(f"no adjudication for {claim_id} within {self._timeout}s")
