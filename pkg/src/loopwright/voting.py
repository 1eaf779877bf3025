"""Majority voting, run-variability classification, and human/LLM reconciliation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .labels import CWLabel
from .records import TripleRun


class VariabilityClass(Enum):
    """How many distinct labels three runs produced."""

    ALL_EQUAL = "all_equal"
    TWO_EQUAL = "two_equal"
    UNEQUAL = "unequal"


class JudgeReason(Enum):
    NO_MAJORITY = "no_majority"
    CONFLICT = "conflict"


class RoutingOutcome(Enum):
    ACCEPTED = "accepted"
    NEEDS_JUDGE = "needs_judge"


@dataclass(frozen=True)
class RoutingDecision:
    """Either an accepted label or a reason the claim goes to the judge."""

    outcome: RoutingOutcome
    label: CWLabel | None = None
    reason: JudgeReason | None = None

    def __post_init__(self) -> None:
        if self.outcome is RoutingOutcome.ACCEPTED:
            if self.label is None or self.reason is not None:
                raise ValueError("accepted decisions carry a label and no reason")
        else:
            if self.reason is None or self.label is not None:
                raise ValueError("judge decisions carry a reason and no label")

    @classmethod
    def accepted(cls, label: CWLabel) -> RoutingDecision:
        return cls(RoutingOutcome.ACCEPTED, label=label)

    @classmethod
    def needs_judge(cls, reason: JudgeReason) -> RoutingDecision:
        return cls(RoutingOutcome.NEEDS_JUDGE, reason=reason)

    @property
    def is_accepted(self) -> bool:
        return self.outcome is RoutingOutcome.ACCEPTED

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "label": self.label.value if self.label else None,
            "reason": self.reason.value if self.reason else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RoutingDecision:
        return cls(
            outcome=RoutingOutcome(data["outcome"]),
            label=CWLabel(data["label"]) if data.get("label") else None,
            reason=JudgeReason(data["reason"]) if data.get("reason") else None,
        )


def _labels_of(t: TripleRun | Sequence[CWLabel]) -> tuple[CWLabel, ...]:
    labels = tuple(t.labels if isinstance(t, TripleRun) else t)
    if len(labels) != 3:
        raise ValueError("expected exactly 3 labels")
    return labels


def majority_vote(t: TripleRun | Sequence[CWLabel]) -> CWLabel | None:
    """Label occurring at least twice, or None when all three differ."""
    label, count = Counter(_labels_of(t)).most_common(1)[0]
    return label if count >= 2 else None


def classify_variability(t: TripleRun | Sequence[CWLabel]) -> VariabilityClass:
    distinct = len(set(_labels_of(t)))
    if distinct == 1:
        return VariabilityClass.ALL_EQUAL
    if distinct == 2:
        return VariabilityClass.TWO_EQUAL
    return VariabilityClass.UNEQUAL


def reconcile(human: CWLabel, t: TripleRun | Sequence[CWLabel]) -> RoutingDecision:
    """Accept when the LLM majority matches the human label, else route to the judge."""
    majority = majority_vote(t)
    if majority is None:
        return RoutingDecision.needs_judge(JudgeReason.NO_MAJORITY)
    if majority == human:
        return RoutingDecision.accepted(human)
    return RoutingDecision.needs_judge(JudgeReason.CONFLICT)


def aggregate_platinum(labels: Sequence[CWLabel]) -> CWLabel | None:
    """Majority of three human annotators; None routes to the fourth judge."""
    return majority_vote(tuple(labels))
