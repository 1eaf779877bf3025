from __future__ import annotations

from collections import deque

import pytest

from loopwright.errors import InvalidModelOutput, OutputNeverValid, UnknownModel
from loopwright.gateway import (
    ModelRegistry,
    ModelSpec,
    parse_label,
    sample_triple,
)
from loopwright.labels import CWLabel, PromptMode, SizeClass
from loopwright.prompts import CW_OUTPUT_LABELS, build_cw_prompt

from .conftest import MockTransport

PROMPT = build_cw_prompt("a claim about the world", PromptMode.ZERO_SHOT)


def test_parse_label_exact_match():
    assert parse_label("Check-worthy Factual", CW_OUTPUT_LABELS) == 2


def test_parse_label_normalizes_whitespace_and_case():
    assert parse_label("  non-factual\n", CW_OUTPUT_LABELS) == 0


def test_parse_label_rejects_substrings():
    with pytest.raises(InvalidModelOutput):
        parse_label(
            "I think it is Non-Factual because it is an opinion", CW_OUTPUT_LABELS
        )


def test_parse_label_rejects_unknown():
    with pytest.raises(InvalidModelOutput):
        parse_label("maybe", CW_OUTPUT_LABELS)


def test_sample_triple_deterministic_mock(model_spec):
    transport = MockTransport(lambda request: "Non-Factual")
    triple = sample_triple(model_spec, PROMPT, "c1", transport)
    assert triple.labels == (CWLabel.NFS, CWLabel.NFS, CWLabel.NFS)
    assert triple.retries == (0, 0, 0)
    assert len(transport.calls) == 3
    assert triple.claim_id == "c1"
    assert triple.model == "mock-model"


def test_sample_triple_retries_garbage_then_valid(model_spec):
    outputs = deque(
        ["Non-Factual", "complete garbage", "Check-worthy Factual", "Non-Factual"]
    )
    transport = MockTransport(lambda request: outputs.popleft())
    triple = sample_triple(model_spec, PROMPT, "c1", transport)
    assert triple.labels == (CWLabel.NFS, CWLabel.CFS, CWLabel.NFS)
    assert triple.retries == (0, 1, 0)
    assert len(transport.calls) == 4


def test_sample_triple_exhausts_retries(model_spec):
    transport = MockTransport(lambda request: "garbage forever")
    with pytest.raises(OutputNeverValid) as excinfo:
        sample_triple(model_spec, PROMPT, "c1", transport)
    assert excinfo.value.slot == 0
    # max_retries=2 means 3 attempts for the first slot only.
    assert len(transport.calls) == 3


def test_sample_triple_mode_recorded(model_spec):
    transport = MockTransport(lambda request: "Unimportant Factual")
    one_shot = build_cw_prompt("text", PromptMode.ONE_SHOT)
    triple = sample_triple(
        model_spec, one_shot, "c1", transport, mode=PromptMode.ONE_SHOT
    )
    assert triple.prompt_mode is PromptMode.ONE_SHOT


def test_request_carries_temperature_and_constraints(model_spec):
    transport = MockTransport(lambda request: "Non-Factual")
    sample_triple(model_spec, PROMPT, "c1", transport)
    wire = transport.calls[0].to_wire()
    assert wire["temperature"] == 1.0
    assert wire["allowed_outputs"] == list(CW_OUTPUT_LABELS)
    assert wire["messages"][0]["role"] == "system"


def test_default_registry_has_twelve_models():
    registry = ModelRegistry.default()
    assert len(registry.keys()) == 12
    by_size = {}
    for spec in registry.specs():
        by_size.setdefault(spec.size_class, []).append(spec.registry_key)
    assert len(by_size[SizeClass.SMALL]) == 5
    assert len(by_size[SizeClass.MEDIUM]) == 4
    assert len(by_size[SizeClass.LARGE]) == 3
    assert all(spec.temperature == 1.0 for spec in registry.specs())


def test_registry_rejects_duplicates_and_unknowns():
    registry = ModelRegistry.default()
    with pytest.raises(ValueError):
        registry.add(registry.get("olmo2-32b"))
    with pytest.raises(UnknownModel):
        registry.get("never-registered")


def test_registry_file_round_trip(tmp_path):
    registry = ModelRegistry.default()
    path = tmp_path / "models.json"
    registry.dump(path)
    loaded = ModelRegistry.load(path)
    assert loaded.keys() == registry.keys()
    assert loaded.get("qwen2.5-72b") == registry.get("qwen2.5-72b")


def test_model_spec_temperature_bounds():
    with pytest.raises(ValueError):
        ModelSpec(
            registry_key="bad",
            display_name="bad",
            endpoint_url="http://x",
            size_class=SizeClass.SMALL,
            family="f",
            temperature=2.5,
        )


def test_concurrency_limited_transport_bounds_in_flight():
    import threading
    import time
    from concurrent.futures import ThreadPoolExecutor

    from loopwright.gateway import CompletionRequest, ConcurrencyLimitedTransport

    lock = threading.Lock()
    in_flight = 0
    peak = 0

    class SlowTransport:
        def complete(self, request):
            nonlocal in_flight, peak
            with lock:
                in_flight += 1
                peak = max(peak, in_flight)
            time.sleep(0.01)
            with lock:
                in_flight -= 1
            return "Non-Factual"

    limited = ConcurrencyLimitedTransport(SlowTransport(), limit=4)
    request = CompletionRequest(
        model_key="m",
        system_text="s",
        user_text="u",
        temperature=1.0,
        allowed_outputs=CW_OUTPUT_LABELS,
    )
    with ThreadPoolExecutor(max_workers=16) as pool:
        list(pool.map(lambda _: limited.complete(request), range(32)))
    assert peak <= 4


def test_audit_log_records_request_and_output(model_spec, tmp_path):
    import json

    from loopwright.gateway import AuditLog

    audit = AuditLog(tmp_path / "audit.jsonl")
    transport = MockTransport(lambda request: "Non-Factual")
    sample_triple(model_spec, PROMPT, "c1", transport, audit=audit)
    lines = (tmp_path / "audit.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    entry = json.loads(lines[0])
    assert entry["output"] == "Non-Factual"
    assert entry["request"]["model"] == "mock-model"
    assert entry["request"]["nonce"]  # per-request nonce is recorded
