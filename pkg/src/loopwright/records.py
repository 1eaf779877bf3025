"""Core record types shared by the pipeline, store, metrics, and service.

Records are immutable value objects; uniqueness and referential checks live in
the persistence layer. Construction is deliberately lenient about content-level
problems (empty claim text, gapped indices) so that ``validate_message`` can
report them and the importer can reject the message as a whole.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

from .labels import (
    AnnotatorKind,
    ArgumentRole,
    CWLabel,
    HSLabel,
    PromptMode,
    ProvenanceCategory,
)


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def _parse_ts(raw: str) -> datetime:
    text = raw[:-1] + "+00:00" if raw.endswith("Z") else raw
    return datetime.fromisoformat(text)


@dataclass(frozen=True)
class AnnotatorRef:
    """Identifies who produced a label: a human, a model run, or the judge."""

    kind: AnnotatorKind
    identifier: str

    def __post_init__(self) -> None:
        if not self.identifier:
            raise ValueError("annotator identifier must be non-empty")

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "identifier": self.identifier}

    @classmethod
    def from_dict(cls, data: dict) -> AnnotatorRef:
        return cls(kind=AnnotatorKind(data["kind"]), identifier=data["identifier"])


@dataclass(frozen=True)
class ClaimRecord:
    """One claim of a message, pre-segmented upstream."""

    claim_id: str
    message_id: str
    index: int
    text: str
    argument_role: ArgumentRole = ArgumentRole.UNMARKED
    claim_hs_label: HSLabel | None = None

    def __post_init__(self) -> None:
        if not self.claim_id:
            raise ValueError("claim_id must be non-empty")
        if not self.message_id:
            raise ValueError("message_id must be non-empty")

    def to_dict(self) -> dict:
        out: dict = {
            "claim_id": self.claim_id,
            "index": self.index,
            "text": self.text,
            "argument_role": self.argument_role.value,
        }
        if self.claim_hs_label is not None:
            out["claim_hs_label"] = self.claim_hs_label.value
        return out

    @classmethod
    def from_dict(cls, data: dict, message_id: str) -> ClaimRecord:
        hs = data.get("claim_hs_label")
        return cls(
            claim_id=data["claim_id"],
            message_id=message_id,
            index=int(data["index"]),
            text=data["text"],
            argument_role=ArgumentRole(data.get("argument_role", "unmarked")),
            claim_hs_label=HSLabel(hs) if hs is not None else None,
        )


@dataclass(frozen=True)
class MessageRecord:
    """A forum message with its corpus-provided hate-speech label and claims."""

    message_id: str
    hs_label: HSLabel
    claims: tuple[ClaimRecord, ...]
    raw_text: str | None = None

    def __post_init__(self) -> None:
        if not self.message_id:
            raise ValueError("message_id must be non-empty")
        object.__setattr__(self, "claims", tuple(self.claims))

    def claims_in_order(self) -> tuple[ClaimRecord, ...]:
        return tuple(sorted(self.claims, key=lambda c: c.index))

    def to_dict(self) -> dict:
        out: dict = {
            "message_id": self.message_id,
            "hs_label": self.hs_label.value,
            "claims": [c.to_dict() for c in self.claims_in_order()],
        }
        if self.raw_text is not None:
            out["raw_text"] = self.raw_text
        return out

    @classmethod
    def from_dict(cls, data: dict) -> MessageRecord:
        message_id = data["message_id"]
        return cls(
            message_id=message_id,
            hs_label=HSLabel(data["hs_label"]),
            claims=tuple(ClaimRecord.from_dict(c, message_id) for c in data["claims"]),
            raw_text=data.get("raw_text"),
        )


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of message validation; errors reject the message at ingest."""

    message_id: str
    errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_message(m: MessageRecord) -> ValidationReport:
    """Check structural invariants of a message and its claims.

    Errors: no claims at all, empty claim text, duplicate or gapped indices,
    duplicate claim ids. Warning: a hateful message with fewer than two claims
    (other corpora may legitimately ship those, so it does not reject).
    """
    errors: list[str] = []
    warnings: list[str] = []
    if not m.claims:
        errors.append("message has no claims")
    for claim in m.claims:
        if not claim.text.strip():
            errors.append(f"claim {claim.claim_id} has empty text")
        if claim.message_id != m.message_id:
            errors.append(f"claim {claim.claim_id} links to another message")
    indices = sorted(c.index for c in m.claims)
    if m.claims and indices != list(range(len(m.claims))):
        errors.append("non-contiguous indices")
    ids = [c.claim_id for c in m.claims]
    if len(set(ids)) != len(ids):
        errors.append("duplicate claim ids")
    if m.hs_label is HSLabel.HATEFUL and len(m.claims) < 2:
        warnings.append("hateful message with fewer than 2 claims")
    return ValidationReport(m.message_id, tuple(errors), tuple(warnings))


@dataclass(frozen=True)
class AnnotationEvent:
    """One label assignment by one source.

    ``run_index`` is 0 for humans and the judge; model runs count 0..2.
    The tuple (claim_id, source, run_index, prompt_mode) is the uniqueness key
    enforced on insertion by the store and the service.
    """

    claim_id: str
    source: AnnotatorRef
    label: CWLabel
    run_index: int = 0
    prompt_mode: PromptMode = PromptMode.NOT_APPLICABLE
    created_at: datetime = field(default_factory=_utc_now)

    def __post_init__(self) -> None:
        if self.run_index < 0:
            raise ValueError("run_index must be >= 0")

    @property
    def key(self) -> tuple[str, AnnotatorRef, int, PromptMode]:
        return (self.claim_id, self.source, self.run_index, self.prompt_mode)

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "source": self.source.to_dict(),
            "label": self.label.value,
            "run_index": self.run_index,
            "prompt_mode": self.prompt_mode.value,
            "created_at": _iso(self.created_at),
        }

    @classmethod
    def from_dict(cls, data: dict) -> AnnotationEvent:
        return cls(
            claim_id=data["claim_id"],
            source=AnnotatorRef.from_dict(data["source"]),
            label=CWLabel(data["label"]),
            run_index=int(data.get("run_index", 0)),
            prompt_mode=PromptMode(data.get("prompt_mode", "none")),
            created_at=_parse_ts(data["created_at"]),
        )


@dataclass(frozen=True)
class TripleRun:
    """The three labels one model produced for one claim under one prompt mode."""

    claim_id: str
    model: str
    prompt_mode: PromptMode
    labels: tuple[CWLabel, CWLabel, CWLabel]
    raw_outputs: tuple[str, str, str]
    retries: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self) -> None:
        if len(self.labels) != 3:
            raise ValueError("a triple run carries exactly 3 labels")
        if len(self.raw_outputs) != 3:
            raise ValueError("a triple run carries exactly 3 raw outputs")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "raw_outputs", tuple(self.raw_outputs))
        object.__setattr__(self, "retries", tuple(self.retries))

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "model": self.model,
            "prompt_mode": self.prompt_mode.value,
            "labels": [l.value for l in self.labels],
            "raw_outputs": list(self.raw_outputs),
            "retries": list(self.retries),
        }

    @classmethod
    def from_dict(cls, data: dict) -> TripleRun:
        return cls(
            claim_id=data["claim_id"],
            model=data["model"],
            prompt_mode=PromptMode(data["prompt_mode"]),
            labels=tuple(CWLabel(l) for l in data["labels"]),
            raw_outputs=tuple(data["raw_outputs"]),
            retries=tuple(data.get("retries", (0, 0, 0))),
        )


@dataclass(frozen=True)
class FinalLabelRecord:
    """Gold label with its provenance, plus the platinum label when known."""

    claim_id: str
    gold: CWLabel
    provenance: ProvenanceCategory
    platinum: CWLabel | None = None

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "gold": self.gold.value,
            "provenance": self.provenance.value,
            "platinum": self.platinum.value if self.platinum else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> FinalLabelRecord:
        plat = data.get("platinum")
        return cls(
            claim_id=data["claim_id"],
            gold=CWLabel(data["gold"]),
            provenance=ProvenanceCategory(data["provenance"]),
            platinum=CWLabel(plat) if plat else None,
        )
