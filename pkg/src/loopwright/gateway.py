"""Model registry, endpoint client, constrained-output parsing, triple sampling.

The wire contract is a minimal chat-completion shape: the request carries the
model key, system/user messages, temperature, and the allowed outputs as a
constrained-decoding hint; the response carries a single ``content`` string.
Servers that ignore the hint are handled by parse-and-retry.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx

from .errors import (
    EndpointUnavailable,
    InvalidModelOutput,
    OutputNeverValid,
    UnknownModel,
)
from .labels import CWLabel, PromptMode, SizeClass
from .prompts import PromptBundle
from .records import TripleRun

DEFAULT_ENDPOINT = "http://localhost:8000/v1/chat/completions"
DEFAULT_MAX_RETRIES = 3
DEFAULT_ENDPOINT_CONCURRENCY = 4


@dataclass(frozen=True)
class ModelSpec:
    """One registry entry describing how to reach and sample a model."""

    registry_key: str
    display_name: str
    endpoint_url: str
    size_class: SizeClass
    family: str
    temperature: float = 1.0
    max_retries: int = DEFAULT_MAX_RETRIES
    credential_env: str = "LOOPWRIGHT_API_TOKEN"

    def __post_init__(self) -> None:
        if not self.registry_key:
            raise ValueError("registry_key must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def to_dict(self) -> dict:
        return {
            "registry_key": self.registry_key,
            "display_name": self.display_name,
            "endpoint_url": self.endpoint_url,
            "size_class": self.size_class.value,
            "family": self.family,
            "temperature": self.temperature,
            "max_retries": self.max_retries,
            "credential_env": self.credential_env,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ModelSpec:
        return cls(
            registry_key=data["registry_key"],
            display_name=data["display_name"],
            endpoint_url=data.get("endpoint_url", DEFAULT_ENDPOINT),
            size_class=SizeClass(data["size_class"]),
            family=data["family"],
            temperature=float(data.get("temperature", 1.0)),
            max_retries=int(data.get("max_retries", DEFAULT_MAX_RETRIES)),
            credential_env=data.get("credential_env", "LOOPWRIGHT_API_TOKEN"),
        )


_DEFAULT_MODELS: tuple[tuple[str, str, SizeClass, str], ...] = (
    ("mistral-7b", "mistralai/Mistral-7B-Instruct-v0.3", SizeClass.SMALL, "mistral"),
    ("llama-8b", "meta-llama/Llama-3.1-8B-Instruct", SizeClass.SMALL, "llama3"),
    ("olmo2-7b", "allenai/OLMo-2-1124-7B-Instruct", SizeClass.SMALL, "olmo2"),
    ("qwen2.5-7b", "Qwen/Qwen2.5-7B-Instruct", SizeClass.SMALL, "qwen2.5"),
    ("command-r-7b", "CohereLabs/c4ai-command-r7b-12-2024", SizeClass.SMALL, "command-r"),
    ("mixtral-8x7b", "mistralai/Mixtral-8x7B-Instruct-v0.1", SizeClass.MEDIUM, "mistral"),
    ("mistral-22b", "mistralai/Mistral-Small-Instruct-2409", SizeClass.MEDIUM, "mistral"),
    ("olmo2-32b", "allenai/OLMo-2-0325-32B-Instruct", SizeClass.MEDIUM, "olmo2"),
    ("mixtral-8x22b", "mistralai/Mixtral-8x22B-Instruct-v0.1", SizeClass.MEDIUM, "mistral"),
    ("llama-70b", "meta-llama/Llama-3.3-70B-Instruct", SizeClass.LARGE, "llama3"),
    ("qwen2.5-72b", "Qwen/Qwen2.5-72B-Instruct", SizeClass.LARGE, "qwen2.5"),
    ("command-r-104b", "CohereLabs/c4ai-command-r-plus-08-2024", SizeClass.LARGE, "command-r"),
)


class ModelRegistry:
    """Keyed collection of model specs; keys must be unique."""

    def __init__(self, specs: list[ModelSpec] | None = None):
        self._specs: dict[str, ModelSpec] = {}
        for spec in specs or []:
            self.add(spec)

    def add(self, spec: ModelSpec) -> None:
        if spec.registry_key in self._specs:
            raise ValueError(f"duplicate registry key: {spec.registry_key}")
        self._specs[spec.registry_key] = spec

    def get(self, key: str) -> ModelSpec:
        try:
            return self._specs[key]
        except KeyError:
            raise UnknownModel(f"model not registered: {key}") from None

    def __contains__(self, key: str) -> bool:
        return key in self._specs

    def keys(self) -> list[str]:
        return list(self._specs)

    def specs(self) -> list[ModelSpec]:
        return list(self._specs.values())

    @classmethod
    def default(cls) -> ModelRegistry:
        reg = cls()
        for key, name, size, family in _DEFAULT_MODELS:
            reg.add(
                ModelSpec(
                    registry_key=key,
                    display_name=name,
                    endpoint_url=DEFAULT_ENDPOINT,
                    size_class=size,
                    family=family,
                )
            )
        return reg

    @classmethod
    def load(cls, path: str | Path) -> ModelRegistry:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls([ModelSpec.from_dict(entry) for entry in data["models"]])

    def dump(self, path: str | Path) -> None:
        payload = {"models": [s.to_dict() for s in self.specs()]}
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def parse_label(raw: str, allowed: tuple[str, ...] | list[str]) -> int:
    """Match a raw completion against the allowed outputs.

    Only whitespace trimming and case folding are applied; substring matches
    are rejected so that hedged answers never pass as labels.
    """
    if not allowed:
        raise ValueError("allowed outputs must be non-empty")
    normalized = raw.strip().casefold()
    for i, candidate in enumerate(allowed):
        if normalized == candidate.strip().casefold():
            return i
    raise InvalidModelOutput(f"output matches no allowed label: {raw!r}")


@dataclass(frozen=True)
class CompletionRequest:
    """One completion call; ``reference`` tags the claim for audit and mocks."""

    model_key: str
    system_text: str
    user_text: str
    temperature: float
    allowed_outputs: tuple[str, ...]
    reference: str | None = None
    nonce: str = field(default_factory=lambda: uuid.uuid4().hex)

    def to_wire(self) -> dict:
        return {
            "model": self.model_key,
            "messages": [
                {"role": "system", "content": self.system_text},
                {"role": "user", "content": self.user_text},
            ],
            "temperature": self.temperature,
            "allowed_outputs": list(self.allowed_outputs),
            "nonce": self.nonce,
        }


class Transport(Protocol):
    """Anything that turns a completion request into raw output text."""

    def complete(self, request: CompletionRequest) -> str: ...


class HttpTransport:
    """POSTs the wire request to a chat-completion endpoint.

    Accepts either the minimal ``{"content": "..."}`` response or the common
    ``{"choices": [{"message": {"content": "..."}}]}`` shape.
    """

    def __init__(self, timeout: float = 60.0):
        self._client = httpx.Client(timeout=timeout)
        self._endpoints: dict[str, tuple[str, str]] = {}

    def bind(self, model: ModelSpec) -> None:
        self._endpoints[model.registry_key] = (model.endpoint_url, model.credential_env)

    def complete(self, request: CompletionRequest) -> str:
        url, credential_env = self._endpoints.get(
            request.model_key, (DEFAULT_ENDPOINT, "LOOPWRIGHT_API_TOKEN")
        )
        headers = {}
        token = os.environ.get(credential_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = self._client.post(url, json=request.to_wire(), headers=headers)
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise EndpointUnavailable(f"{url}: {exc}") from exc
        body = response.json()
        if "content" in body:
            return body["content"]
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EndpointUnavailable(f"{url}: unrecognized response shape") from exc


class ConcurrencyLimitedTransport:
    """Bounds in-flight requests to one endpoint; extra callers block."""

    def __init__(self, inner: Transport, limit: int = DEFAULT_ENDPOINT_CONCURRENCY):
        if limit < 1:
            raise ValueError("concurrency limit must be >= 1")
        self._inner = inner
        self._semaphore = threading.BoundedSemaphore(limit)

    def complete(self, request: CompletionRequest) -> str:
        with self._semaphore:
            return self._inner.complete(request)


class AuditLog:
    """Optional JSONL trace of every request/response pair."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.Lock()
        self._path.parent.mkdir(parents=True, exist_ok=True)

    def record(self, request: CompletionRequest, output: str) -> None:
        line = json.dumps(
            {"request": request.to_wire(), "output": output}, ensure_ascii=False
        )
        with self._lock:
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")


def complete_label(
    model: ModelSpec,
    prompt: PromptBundle,
    transport: Transport,
    *,
    reference: str | None = None,
    audit: AuditLog | None = None,
    temperature: float | None = None,
) -> tuple[int, str, int]:
    """Run one completion with parse-and-retry.

    Returns (index into allowed outputs, raw output, retries used). Retries
    cover invalid outputs only; endpoint failures propagate immediately.
    """
    attempts = model.max_retries + 1
    last_output = ""
    for attempt in range(attempts):
        request = CompletionRequest(
            model_key=model.registry_key,
            system_text=prompt.system_text,
            user_text=prompt.user_text,
            temperature=model.temperature if temperature is None else temperature,
            allowed_outputs=prompt.allowed_outputs,
            reference=reference,
        )
        last_output = transport.complete(request)
        if audit is not None:
            audit.record(request, last_output)
        try:
            return parse_label(last_output, prompt.allowed_outputs), last_output, attempt
        except InvalidModelOutput:
            continue
    raise OutputNeverValid(slot=0, attempts=attempts, last_output=last_output)


def sample_triple(
    model: ModelSpec,
    prompt: PromptBundle,
    claim_id: str,
    transport: Transport,
    *,
    mode: PromptMode = PromptMode.ZERO_SHOT,
    audit: AuditLog | None = None,
) -> TripleRun:
    """Issue three independent completions for one claim.

    Slots are filled in index order; each slot gets its own retry budget and
    fails with OutputNeverValid carrying the slot number when exhausted.
    """
    if prompt.task_kind.value != "check_worthiness":
        raise ValueError("triple sampling applies to the check-worthiness task")
    labels: list[CWLabel] = []
    raws: list[str] = []
    retries: list[int] = []
    for slot in range(3):
        try:
            idx, raw, used = complete_label(
                model, prompt, transport, reference=claim_id, audit=audit
            )
        except OutputNeverValid as exc:
            raise OutputNeverValid(slot, exc.attempts, exc.last_output) from None
        labels.append(CWLabel(prompt.allowed_outputs[idx]))
        raws.append(raw)
        retries.append(used)
    return TripleRun(
        claim_id=claim_id,
        model=model.registry_key,
        prompt_mode=mode,
        labels=tuple(labels),
        raw_outputs=tuple(raws),
        retries=tuple(retries),
    )
