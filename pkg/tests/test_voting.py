from __future__ import annotations

import itertools

import pytest

from loopwright.labels import CWLabel
from loopwright.voting import (
    JudgeReason,
    RoutingDecision,
    RoutingOutcome,
    VariabilityClass,
    aggregate_platinum,
    classify_variability,
    majority_vote,
    reconcile,
)

CFS, UFS, NFS = CWLabel.CFS, CWLabel.UFS, CWLabel.NFS


# Independent enumeration oracle: counting by set/count primitives only.
def oracle_majority(triple):
    for label in set(triple):
        if list(triple).count(label) >= 2:
            return label
    return None


def oracle_variability(triple):
    return {1: VariabilityClass.ALL_EQUAL, 2: VariabilityClass.TWO_EQUAL, 3: VariabilityClass.UNEQUAL}[
        len(set(triple))
    ]


def oracle_reconcile(human, triple):
    winner = oracle_majority(triple)
    if winner is None:
        return ("needs_judge", JudgeReason.NO_MAJORITY)
    if winner == human:
        return ("accepted", human)
    return ("needs_judge", JudgeReason.CONFLICT)


def all_triples():
    return list(itertools.product(list(CWLabel), repeat=3))


def test_majority_examples():
    assert majority_vote((CFS, CFS, CFS)) is CFS
    assert majority_vote((CFS, NFS, CFS)) is CFS
    assert majority_vote((CFS, NFS, UFS)) is None


def test_variability_examples():
    assert classify_variability((NFS, NFS, NFS)) is VariabilityClass.ALL_EQUAL
    assert classify_variability((NFS, UFS, NFS)) is VariabilityClass.TWO_EQUAL
    assert classify_variability((NFS, UFS, CFS)) is VariabilityClass.UNEQUAL


def test_reconcile_examples():
    accepted = reconcile(CFS, (CFS, CFS, NFS))
    assert accepted.is_accepted and accepted.label is CFS

    conflict = reconcile(NFS, (CFS, CFS, UFS))
    assert not conflict.is_accepted and conflict.reason is JudgeReason.CONFLICT

    no_majority = reconcile(NFS, (CFS, NFS, UFS))
    assert no_majority.reason is JudgeReason.NO_MAJORITY


def test_exhaustive_against_oracle():
    for triple in all_triples():
        assert majority_vote(triple) == oracle_majority(triple)
        assert classify_variability(triple) == oracle_variability(triple)
        for human in CWLabel:
            decision = reconcile(human, triple)
            expected = oracle_reconcile(human, triple)
            if expected[0] == "accepted":
                assert decision.is_accepted and decision.label == expected[1]
            else:
                assert not decision.is_accepted and decision.reason == expected[1]


def test_partition_counts():
    triples = all_triples()
    assert len(triples) == 27
    counts = {
        VariabilityClass.ALL_EQUAL: 0,
        VariabilityClass.TWO_EQUAL: 0,
        VariabilityClass.UNEQUAL: 0,
    }
    no_majority = 0
    for triple in triples:
        counts[classify_variability(triple)] += 1
        if majority_vote(triple) is None:
            no_majority += 1
    assert counts[VariabilityClass.ALL_EQUAL] == 3
    assert counts[VariabilityClass.TWO_EQUAL] == 18
    assert counts[VariabilityClass.UNEQUAL] == 6
    assert no_majority == 6


def test_routing_decision_consistency_enforced():
    with pytest.raises(ValueError):
        RoutingDecision(RoutingOutcome.ACCEPTED)
    with pytest.raises(ValueError):
        RoutingDecision(RoutingOutcome.NEEDS_JUDGE, label=CFS, reason=JudgeReason.CONFLICT)


def test_routing_decision_round_trip():
    for decision in (
        RoutingDecision.accepted(UFS),
        RoutingDecision.needs_judge(JudgeReason.NO_MAJORITY),
    ):
        assert RoutingDecision.from_dict(decision.to_dict()) == decision


def test_aggregate_platinum():
    assert aggregate_platinum([CFS, CFS, CFS]) is CFS
    assert aggregate_platinum([CFS, UFS, CFS]) is CFS
    assert aggregate_platinum([CFS, UFS, NFS]) is None


def test_majority_requires_three():
    with pytest.raises(ValueError):
        majority_vote((CFS, CFS))
