from __future__ import annotations

import pytest

from loopwright.errors import CorruptLog, EndpointUnavailable, LoopwrightError
from loopwright.gateway import CompletionRequest
from loopwright.labels import CWLabel, PromptMode, ProvenanceCategory
from loopwright.pipeline import (
    batch_judge,
    effort_report,
    replay_run,
    run_pipeline,
    run_platinum,
)
from loopwright.records import FinalLabelRecord
from loopwright.voting import JudgeReason

from .conftest import MockTransport, toy_dataset

CFS, UFS, NFS = CWLabel.CFS, CWLabel.UFS, CWLabel.NFS


def record(claim_id, gold, provenance):
    return FinalLabelRecord(claim_id=claim_id, gold=gold, provenance=provenance)


# ---------------------------------------------------------------------------
# effort_report


def test_effort_report_arithmetic():
    strata = {f"c{i}": ("HS" if i < 633 else "Non-HS") for i in range(1615)}
    finals = []
    ids = iter(sorted(strata))
    for provenance, count in [
        (ProvenanceCategory.JUDGE_SIDED_HUMAN, 589),
        (ProvenanceCategory.JUDGE_SIDED_LLM, 138),
        (ProvenanceCategory.JUDGE_OVERRIDE, 27),
        (ProvenanceCategory.ACCEPTED, 861),
    ]:
        for _ in range(count):
            finals.append(record(next(ids), NFS, provenance))
    report = effort_report(finals, strata)
    assert report.total_claims == 1615
    assert report.judged_count == 754
    assert report.judged_percent == pytest.approx(46.69, abs=0.005)
    assert report.sided_human_percent == pytest.approx(78.12, abs=0.005)
    assert report.sided_llm_percent == pytest.approx(18.30, abs=0.005)
    assert report.override == 754 - 589 - 138
    assert report.override_percent == pytest.approx(3.58, abs=0.005)


def test_effort_report_empty_no_division_error():
    report = effort_report([], {})
    assert report.judged_count == 0
    assert report.judged_percent == 0.0
    assert report.sided_human_percent == 0.0


def test_effort_report_stratum_percentages():
    strata = {f"h{i}": "HS" for i in range(633)}
    finals = [
        record(f"h{i}", NFS, ProvenanceCategory.JUDGE_SIDED_HUMAN) for i in range(257)
    ]
    report = effort_report(finals, strata)
    assert report.strata["HS"].judged == 257
    assert report.strata["HS"].judged_percent == pytest.approx(40.60, abs=0.005)


# ---------------------------------------------------------------------------
# run_pipeline on a small fixture


def scripted_triples(script: dict[str, tuple[CWLabel, CWLabel, CWLabel]]) -> MockTransport:
    counters: dict[str, int] = {}

    def respond(request: CompletionRequest) -> str:
        slot = counters.get(request.reference, 0)
        counters[request.reference] = slot + 1
        return script[request.reference][slot % 3].value

    return MockTransport(respond)


@pytest.fixture
def small_world(model_spec, dataset):
    claims = dataset.claims_in_order()
    ids = [c.claim_id for c in claims]  # 8 claims: m000/m001 HS, m002/m003 Non-HS
    human = {cid: NFS for cid in ids}
    script = {
        ids[0]: (NFS, NFS, NFS),  # accepted
        ids[1]: (NFS, CFS, NFS),  # accepted (majority NFS)
        ids[2]: (CFS, CFS, NFS),  # conflict, judge sides human
        ids[3]: (CFS, CFS, CFS),  # conflict, judge sides llm
        ids[4]: (UFS, UFS, NFS),  # conflict, judge overrides
        ids[5]: (CFS, UFS, NFS),  # no majority, judge = human
        ids[6]: (UFS, CFS, NFS),  # no majority, judge independent
        ids[7]: (NFS, NFS, UFS),  # accepted
    }
    judge = {
        ids[2]: NFS,
        ids[3]: CFS,
        ids[4]: CFS,
        ids[5]: NFS,
        ids[6]: UFS,
    }
    return dataset, model_spec, ids, human, script, judge


def test_pipeline_small_fixture(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    transport = scripted_triples(script)
    report = run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge, transport,
        tmp_path / "run", seed=11,
    )
    assert len(report.finals) == 8
    assert report.failed == {}
    by_claim = {f.claim_id: f for f in report.finals}
    assert by_claim[ids[0]].provenance is ProvenanceCategory.ACCEPTED
    assert by_claim[ids[2]].provenance is ProvenanceCategory.JUDGE_SIDED_HUMAN
    assert by_claim[ids[3]].provenance is ProvenanceCategory.JUDGE_SIDED_LLM
    assert by_claim[ids[4]].provenance is ProvenanceCategory.JUDGE_OVERRIDE
    assert by_claim[ids[5]].provenance is ProvenanceCategory.JUDGE_SIDED_HUMAN
    assert by_claim[ids[6]].provenance is ProvenanceCategory.JUDGE_INDEPENDENT
    assert by_claim[ids[4]].gold is CFS  # judge precedence
    effort = report.effort
    assert effort.judged_count == 5
    assert effort.accepted == 3
    assert effort.judged_percent == pytest.approx(62.5)
    # routing soundness: accepted implies equality with human label
    for claim_id, decision in report.routings.items():
        if decision.is_accepted:
            assert decision.label == human[claim_id]
            assert by_claim[claim_id].provenance is ProvenanceCategory.ACCEPTED
        else:
            assert by_claim[claim_id].provenance is not ProvenanceCategory.ACCEPTED


def test_pipeline_replay_reproduces_finals(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    report = run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge,
        scripted_triples(script), tmp_path / "run", seed=11,
    )
    replayed = replay_run(tmp_path / "run", dataset)
    assert replayed.finals == report.finals
    assert replayed.finals_bytes() == report.finals_bytes()
    assert replayed.effort == report.effort


def test_pipeline_requires_human_labels(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    human = dict(human)
    human.pop(ids[3])
    with pytest.raises(LoopwrightError, match="first-annotator"):
        run_pipeline(
            dataset, spec, PromptMode.ZERO_SHOT, human, judge,
            scripted_triples(script), tmp_path / "run",
        )


def test_pipeline_failure_isolation_and_resume(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    broken = set(ids[4:])

    counters: dict[str, int] = {}

    def flaky(request: CompletionRequest) -> str:
        if request.reference in broken:
            raise EndpointUnavailable("endpoint down")
        slot = counters.get(request.reference, 0)
        counters[request.reference] = slot + 1
        return script[request.reference][slot % 3].value

    first = run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge,
        MockTransport(flaky), tmp_path / "run", seed=11,
    )
    assert set(first.failed) == broken
    assert len(first.finals) == 4

    healthy = scripted_triples(script)
    resumed = run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge, healthy,
        tmp_path / "run", seed=11, resume=True,
    )
    assert resumed.failed == {}
    assert len(resumed.finals) == 8
    # only the failed claims hit the endpoint on resume, 3 slots each
    assert set(healthy.references()) == broken
    assert len(healthy.calls) == len(broken) * 3


def test_pipeline_resume_of_completed_run_is_noop(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    report = run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge,
        scripted_triples(script), tmp_path / "run", seed=11,
    )
    idle = MockTransport(lambda request: (_ for _ in ()).throw(AssertionError))
    again = run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge, idle,
        tmp_path / "run", seed=11, resume=True,
    )
    assert idle.calls == []
    assert again.finals == report.finals
    assert again.finals_bytes() == report.finals_bytes()


def test_pipeline_rejects_mismatched_resume(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge,
        scripted_triples(script), tmp_path / "run", seed=11,
    )
    with pytest.raises(LoopwrightError, match="resume configuration"):
        run_pipeline(
            dataset, spec, PromptMode.ONE_SHOT, human, judge,
            scripted_triples(script), tmp_path / "run", seed=11, resume=True,
        )
    with pytest.raises(FileExistsError):
        run_pipeline(
            dataset, spec, PromptMode.ZERO_SHOT, human, judge,
            scripted_triples(script), tmp_path / "run", seed=11,
        )


def test_pipeline_surfaces_corrupt_log(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge,
        scripted_triples(script), tmp_path / "run", seed=11,
    )
    log_path = tmp_path / "run" / "events.log"
    with log_path.open("a", encoding="utf-8") as fh:
        fh.write('{"kind": "claim_final", "claim')
    with pytest.raises(CorruptLog):
        run_pipeline(
            dataset, spec, PromptMode.ZERO_SHOT, human, judge,
            scripted_triples(script), tmp_path / "run", seed=11, resume=True,
        )


def test_pipeline_forced_no_majority(model_spec, tmp_path):
    dataset = toy_dataset(n_messages=2, claims_per_message=2)
    ids = [c.claim_id for c in dataset.claims_in_order()]
    script = {cid: (CFS, NFS, UFS) for cid in ids}
    human = {cid: CFS for cid in ids}
    judge = {cid: CFS for cid in ids}
    report = run_pipeline(
        dataset, model_spec, PromptMode.ZERO_SHOT, human, judge,
        scripted_triples(script), tmp_path / "run",
    )
    assert all(
        d.reason is JudgeReason.NO_MAJORITY for d in report.routings.values()
    )
    assert report.effort.judged_percent == pytest.approx(100.0)


def test_no_claim_is_both_accepted_and_adjudicated(small_world, tmp_path):
    dataset, spec, ids, human, script, judge = small_world
    report = run_pipeline(
        dataset, spec, PromptMode.ZERO_SHOT, human, judge,
        scripted_triples(script), tmp_path / "run", seed=11,
    )
    accepted = {
        cid for cid, d in report.routings.items() if d.is_accepted
    }
    adjudicated = set(report.judge_labels)
    assert accepted.isdisjoint(adjudicated)
    assert accepted | adjudicated == set(ids)


# ---------------------------------------------------------------------------
# platinum pipeline


def test_platinum_majority_and_tie_breaks():
    claim_ids = [f"c{i}" for i in range(6)]
    ann1 = {"c0": CFS, "c1": CFS, "c2": NFS, "c3": UFS, "c4": CFS, "c5": NFS}
    ann2 = {"c0": CFS, "c1": UFS, "c2": NFS, "c3": UFS, "c4": UFS, "c5": NFS}
    ann3 = {"c0": CFS, "c1": CFS, "c2": UFS, "c3": UFS, "c4": NFS, "c5": NFS}
    judge = {"c4": UFS}
    report = run_platinum({"a1": ann1, "a2": ann2, "a3": ann3}, judge)
    assert report.finals["c0"] is CFS  # unanimous
    assert report.finals["c1"] is CFS  # 2 of 3
    assert report.finals["c4"] is UFS  # judge decided
    assert report.all_agree == 3
    assert report.two_agree == 2
    assert report.judged == 1
    assert report.judged_percent == pytest.approx(100 / 6)
    assert set(report.finals) == set(claim_ids)


def test_platinum_requires_three_annotators():
    with pytest.raises(LoopwrightError):
        run_platinum({"a1": {}, "a2": {}}, {})


def test_platinum_requires_complete_annotations():
    with pytest.raises(LoopwrightError, match="missing"):
        run_platinum(
            {"a1": {"c1": CFS}, "a2": {"c1": CFS}, "a3": {}},
            {},
        )


def test_batch_judge_missing_label():
    provider = batch_judge({})
    from loopwright.judging import make_judge_case

    case = make_judge_case("c1", "text", NFS, CFS, seed=0)
    with pytest.raises(LoopwrightError, match="judge file"):
        provider(case, NFS, CFS)
