"""Shared fixtures: deterministic transports and toy corpora."""

from __future__ import annotations

import threading
from collections import deque
from typing import Callable

import pytest

from loopwright.errors import EndpointUnavailable
from loopwright.gateway import CompletionRequest, ModelSpec
from loopwright.labels import ArgumentRole, CWLabel, HSLabel, SizeClass
from loopwright.records import ClaimRecord, MessageRecord
from loopwright.store import Dataset


class MockTransport:
    """Thread-safe transport driven by a responder function."""

    def __init__(self, responder: Callable[[CompletionRequest], str]):
        self._responder = responder
        self._lock = threading.Lock()
        self.calls: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.calls.append(request)
        return self._responder(request)

    def references(self) -> list[str]:
        return [c.reference for c in self.calls]


def scripted_by_reference(script: dict[str, list[str]]) -> MockTransport:
    """Each claim reference consumes its scripted outputs in order."""
    queues = {ref: deque(outputs) for ref, outputs in script.items()}
    lock = threading.Lock()

    def respond(request: CompletionRequest) -> str:
        with lock:
            queue = queues.get(request.reference)
            if not queue:
                raise EndpointUnavailable(f"no script for {request.reference}")
            return queue[0] if len(queue) == 1 else queue.popleft()

    return MockTransport(respond)


def echo_transport(label: CWLabel) -> MockTransport:
    return MockTransport(lambda request: label.value)


@pytest.fixture
def model_spec() -> ModelSpec:
    return ModelSpec(
        registry_key="mock-model",
        display_name="mock/mock-model",
        endpoint_url="http://localhost:9/unused",
        size_class=SizeClass.SMALL,
        family="mock",
        max_retries=2,
    )


def make_message(
    message_id: str,
    hs: HSLabel,
    texts: list[str],
    claim_hs: list[HSLabel | None] | None = None,
) -> MessageRecord:
    claim_hs = claim_hs or [None] * len(texts)
    return MessageRecord(
        message_id=message_id,
        hs_label=hs,
        claims=tuple(
            ClaimRecord(
                claim_id=f"{message_id}-c{i}",
                message_id=message_id,
                index=i,
                text=text,
                argument_role=ArgumentRole.UNMARKED,
                claim_hs_label=claim_hs[i],
            )
            for i, text in enumerate(texts)
        ),
    )


def toy_dataset(n_messages: int = 4, claims_per_message: int = 2) -> Dataset:
    """Half hateful, half not; claim texts are distinct and non-empty."""
    messages = []
    for m in range(n_messages):
        hs = HSLabel.HATEFUL if m < n_messages // 2 else HSLabel.NON_HATEFUL
        texts = [
            f"statement {m}-{k} about subject {(m + k) % 5}"
            for k in range(claims_per_message)
        ]
        messages.append(make_message(f"m{m:03d}", hs, texts))
    return Dataset(tuple(messages))


@pytest.fixture
def dataset() -> Dataset:
    return toy_dataset()
