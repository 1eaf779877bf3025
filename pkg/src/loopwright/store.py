"""Flat-file persistence: corpora, append-only event logs, release bundles.

Every file is JSONL with a leading header line carrying the schema version;
readers tolerate header-less files for interoperability. Exports are
deterministic: the same project state always produces the same bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    CorpusParseError,
    CorpusValidationError,
    CorruptLog,
    DuplicateAnnotation,
    IncompleteTrack,
)
from .labels import CWLabel, HSLabel
from .records import (
    AnnotationEvent,
    ClaimRecord,
    FinalLabelRecord,
    MessageRecord,
    TripleRun,
    validate_message,
)

SCHEMA_VERSION = 1

# Metadata keys that must not appear in ingested corpora; anonymization is an
# upstream duty, this is the tripwire.
DEFAULT_DENY_LIST: tuple[str, ...] = ("username", "user", "user_id", "author", "url")


def canonical_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _header(kind: str) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind}


def write_jsonl(path: Path, kind: str, records: Iterable[dict]) -> int:
    """Write a header line followed by one record per line; returns record count."""
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        fh.write(canonical_json(_header(kind)) + "\n")
        for record in records:
            fh.write(canonical_json(record) + "\n")
            count += 1
    return count


def read_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_no, record), skipping a header line when present.

    Unknown fields in records are preserved; parse failures raise with the
    1-based line number.
    """
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(line_no, f"invalid JSON: {exc}") from None
            if line_no == 1 and isinstance(obj, dict) and "schema_version" in obj:
                continue
            if not isinstance(obj, dict):
                raise CorpusParseError(line_no, "record is not an object")
            yield line_no, obj


# ---------------------------------------------------------------------------
# Dataset


@dataclass(frozen=True)
class Dataset:
    """An imported corpus with index structures for claim lookups."""

    messages: tuple[MessageRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        claims: dict[str, ClaimRecord] = {}
        message_index: dict[str, MessageRecord] = {}
        for message in self.messages:
            if message.message_id in message_index:
                raise ValueError(f"duplicate message id: {message.message_id}")
            message_index[message.message_id] = message
            for claim in message.claims:
                if claim.claim_id in claims:
                    raise ValueError(f"duplicate claim id: {claim.claim_id}")
                claims[claim.claim_id] = claim
        object.__setattr__(self, "_claims", claims)
        object.__setattr__(self, "_messages_by_id", message_index)

    def claims_in_order(self) -> list[ClaimRecord]:
        """All claims, ordered by message id then claim index."""
        out: list[ClaimRecord] = []
        for message in sorted(self.messages, key=lambda m: m.message_id):
            out.extend(message.claims_in_order())
        return out

    def claim(self, claim_id: str) -> ClaimRecord:
        return self._claims[claim_id]  # type: ignore[attr-defined]

    def message(self, message_id: str) -> MessageRecord:
        return self._messages_by_id[message_id]  # type: ignore[attr-defined]

    def message_of(self, claim_id: str) -> MessageRecord:
        return self.message(self.claim(claim_id).message_id)

    def hs_strata(self) -> dict[str, str]:
        """claim_id -> "HS" / "Non-HS" by the parent message's label."""
        return {
            claim.claim_id: (
                "HS"
                if self.message(claim.message_id).hs_label is HSLabel.HATEFUL
                else "Non-HS"
            )
            for claim in self.claims_in_order()
        }

    def message_hs_by_claim(self) -> dict[str, HSLabel]:
        return {
            claim.claim_id: self.message(claim.message_id).hs_label
            for claim in self.claims_in_order()
        }

    def claim_hs_by_claim(self) -> dict[str, HSLabel | None]:
        return {
            claim.claim_id: claim.claim_hs_label for claim in self.claims_in_order()
        }


def import_corpus(
    path: str | Path, deny_list: tuple[str, ...] = DEFAULT_DENY_LIST
) -> Dataset:
    """Parse and validate a canonical messages file.

    A message failing validation rejects the whole import; warnings are kept
    on the dataset only implicitly (they do not block). Deny-listed metadata
    fields anywhere in a record are treated as validation failures.
    """
    messages: list[MessageRecord] = []
    for line_no, obj in read_jsonl(Path(path)):
        denied = sorted(set(obj) & set(deny_list))
        for claim_obj in obj.get("claims", []) or []:
            if isinstance(claim_obj, dict):
                denied.extend(sorted(set(claim_obj) & set(deny_list)))
        if denied:
            raise CorpusValidationError(
                str(obj.get("message_id", f"line {line_no}")),
                [f"deny-listed metadata field present: {name}" for name in denied],
            )
        try:
            message = MessageRecord.from_dict(obj)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusParseError(line_no, str(exc)) from None
        report = validate_message(message)
        if not report.ok:
            raise CorpusValidationError(message.message_id, list(report.errors))
        messages.append(message)
    return Dataset(tuple(messages))


# ---------------------------------------------------------------------------
# Append-only event log


class EventLog:
    """Append-only JSONL log with a header; state is a fold over events."""

    def __init__(self, path: str | Path, kind: str = "run_log"):
        self.path = Path(path)
        self.kind = kind

    def exists(self) -> bool:
        return self.path.exists()

    def initialize(self, extra: dict | None = None) -> None:
        if self.exists():
            raise FileExistsError(f"event log already exists: {self.path}")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        header = _header(self.kind)
        if extra:
            header.update(extra)
        with self.path.open("w", encoding="utf-8") as fh:
            fh.write(canonical_json(header) + "\n")

    def append(self, event: dict) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(canonical_json(event) + "\n")
            fh.flush()

    def repair(self) -> int:
        """Truncate the log to its parseable prefix; returns events kept."""
        try:
            _, events = self.read()
            return len(events)
        except CorruptLog as exc:
            header_line = self.path.read_text(encoding="utf-8").splitlines()[0]
            lines = [header_line] + [canonical_json(e) for e in exc.recovered]
            self.path.write_text("\n".join(lines) + "\n", encoding="utf-8")
            return len(exc.recovered)

    def read(self) -> tuple[dict, list[dict]]:
        """Return (header, events); raise CorruptLog with the good prefix."""
        header: dict | None = None
        events: list[dict] = []
        with self.path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                text = line.strip("\n")
                if not text:
                    continue
                try:
                    obj = json.loads(text)
                except json.JSONDecodeError as exc:
                    raise CorruptLog(line_no, str(exc), events) from None
                if line_no == 1:
                    if not isinstance(obj, dict) or "schema_version" not in obj:
                        raise CorruptLog(line_no, "missing log header", [])
                    header = obj
                else:
                    events.append(obj)
        if header is None:
            raise CorruptLog(0, "empty log", [])
        return header, events


# ---------------------------------------------------------------------------
# Project store


class AnnotationEventStore:
    """In-memory event set enforcing key uniqueness, backed by an EventLog."""

    def __init__(self, log: EventLog | None = None):
        self._log = log
        self._events: list[AnnotationEvent] = []
        self._keys: set = set()
        if log is not None and log.exists():
            _, raw = log.read()
            for obj in raw:
                self._admit(AnnotationEvent.from_dict(obj["event"]))

    def _admit(self, event: AnnotationEvent) -> None:
        if event.key in self._keys:
            raise DuplicateAnnotation(
                f"annotation already recorded for {event.claim_id} by "
                f"{event.source.identifier} (run {event.run_index})"
            )
        self._keys.add(event.key)
        self._events.append(event)

    def insert(self, event: AnnotationEvent) -> None:
        self._admit(event)
        if self._log is not None:
            if not self._log.exists():
                self._log.initialize()
            self._log.append({"kind": "annotation", "event": event.to_dict()})

    def events(self) -> list[AnnotationEvent]:
        return list(self._events)


@dataclass
class ProjectState:
    """Everything a release bundle needs, in memory."""

    dataset: Dataset
    annotation_events: list[AnnotationEvent] = field(default_factory=list)
    triples: list[TripleRun] = field(default_factory=list)
    gold: list[FinalLabelRecord] = field(default_factory=list)
    platinum: dict[str, CWLabel] = field(default_factory=dict)


@dataclass(frozen=True)
class ReleaseBundle:
    """Paths and manifest of an exported release."""

    root: Path
    manifest: dict

    @property
    def files(self) -> dict[str, Path]:
        return {name: self.root / f"{name}.jsonl" for name in self.manifest["counts"]}


_EVENT_SORT_KEY = lambda e: (  # noqa: E731
    e.claim_id,
    e.source.kind.value,
    e.source.identifier,
    e.prompt_mode.value,
    e.run_index,
)


def export_bundle(state: ProjectState, out_dir: str | Path) -> ReleaseBundle:
    """Write the full release bundle; fails if the gold track is incomplete."""
    out = Path(out_dir)
    all_claims = state.dataset.claims_in_order()
    gold_by_claim = {record.claim_id: record for record in state.gold}
    missing = [c.claim_id for c in all_claims if c.claim_id not in gold_by_claim]
    if missing:
        raise IncompleteTrack(missing)

    messages = sorted(state.dataset.messages, key=lambda m: m.message_id)
    claims = all_claims
    annotations = sorted(state.annotation_events, key=_EVENT_SORT_KEY)
    predictions = sorted(
        state.triples, key=lambda t: (t.claim_id, t.model, t.prompt_mode.value)
    )
    gold = [gold_by_claim[c.claim_id] for c in all_claims]
    platinum = [
        {"claim_id": claim_id, "label": label.value}
        for claim_id, label in sorted(state.platinum.items())
    ]

    counts = {
        "messages": write_jsonl(
            out / "messages.jsonl", "messages", (m.to_dict() for m in messages)
        ),
        "claims": write_jsonl(
            out / "claims.jsonl",
            "claims",
            (dict(c.to_dict(), message_id=c.message_id) for c in claims),
        ),
        "gold": write_jsonl(out / "gold.jsonl", "gold", (g.to_dict() for g in gold)),
        "platinum": write_jsonl(out / "platinum.jsonl", "platinum", iter(platinum)),
        "annotations": write_jsonl(
            out / "annotations.jsonl", "annotations", (a.to_dict() for a in annotations)
        ),
        "predictions": write_jsonl(
            out / "predictions.jsonl", "predictions", (t.to_dict() for t in predictions)
        ),
    }
    manifest = {"schema_version": SCHEMA_VERSION, "counts": counts}
    (out / "manifest.json").write_text(
        canonical_json(manifest) + "\n", encoding="utf-8"
    )
    return ReleaseBundle(root=out, manifest=manifest)


def import_bundle(bundle_dir: str | Path) -> ProjectState:
    """Load a release bundle back into memory."""
    root = Path(bundle_dir)
    messages = [
        MessageRecord.from_dict(obj) for _, obj in read_jsonl(root / "messages.jsonl")
    ]
    state = ProjectState(dataset=Dataset(tuple(messages)))
    for _, obj in read_jsonl(root / "annotations.jsonl"):
        state.annotation_events.append(AnnotationEvent.from_dict(obj))
    for _, obj in read_jsonl(root / "predictions.jsonl"):
        state.triples.append(TripleRun.from_dict(obj))
    for _, obj in read_jsonl(root / "gold.jsonl"):
        state.gold.append(FinalLabelRecord.from_dict(obj))
    for _, obj in read_jsonl(root / "platinum.jsonl"):
        state.platinum[obj["claim_id"]] = CWLabel(obj["label"])
    return state


def verify_bundle(bundle_dir: str | Path) -> list[str]:
    """Cross-check manifest counts and referential integrity; empty = clean."""
    root = Path(bundle_dir)
    problems: list[str] = []
    try:
        manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        return ["manifest.json is missing"]

    records: dict[str, list[dict]] = {}
    for name, expected in manifest.get("counts", {}).items():
        path = root / f"{name}.jsonl"
        if not path.exists():
            problems.append(f"{name}.jsonl is missing")
            continue
        rows = [obj for _, obj in read_jsonl(path)]
        records[name] = rows
        if len(rows) != expected:
            problems.append(
                f"{name}.jsonl has {len(rows)} records, manifest says {expected}"
            )

    claim_ids = {obj["claim_id"] for obj in records.get("claims", [])}
    message_ids = {obj["message_id"] for obj in records.get("messages", [])}
    nested_claim_ids = {
        claim["claim_id"]
        for obj in records.get("messages", [])
        for claim in obj.get("claims", [])
    }
    if claim_ids != nested_claim_ids:
        problems.append("claims.jsonl does not match the claims nested in messages.jsonl")
    for obj in records.get("claims", []):
        if obj.get("message_id") not in message_ids:
            problems.append(f"claim {obj['claim_id']} references unknown message")
    for name in ("gold", "platinum", "annotations", "predictions"):
        for obj in records.get(name, []):
            if obj["claim_id"] not in claim_ids:
                problems.append(
                    f"{name}.jsonl references unknown claim {obj['claim_id']}"
                )
    return problems


# ---------------------------------------------------------------------------
# Batch label files (human and judge annotations supplied offline)


def read_label_file(path: str | Path) -> dict[str, CWLabel]:
    """Read {claim_id, label} lines into a mapping."""
    labels: dict[str, CWLabel] = {}
    for line_no, obj in read_jsonl(Path(path)):
        try:
            labels[obj["claim_id"]] = CWLabel(obj["label"])
        except (KeyError, ValueError) as exc:
            raise CorpusParseError(line_no, str(exc)) from None
    return labels


def write_label_file(path: str | Path, labels: Mapping[str, CWLabel], kind: str) -> int:
    return write_jsonl(
        Path(path),
        kind,
        (
            {"claim_id": claim_id, "label": label.value}
            for claim_id, label in sorted(labels.items())
        ),
    )
