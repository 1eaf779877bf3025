"""Blind judge cases and final-label adjudication.

The judge sees unattributed labels in a seeded, uniformly swapped order and
may side with either one or assign any third label; their decision is final.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .errors import InconsistentCase
from .labels import CWLabel, ProvenanceCategory
from .records import FinalLabelRecord


def derive_subseed(project_seed: int, claim_id: str) -> int:
    """Stable per-claim seed so replays shuffle identically."""
    digest = hashlib.sha256(f"{project_seed}:{claim_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class JudgeCase:
    """Adjudication payload: claim text plus one or two unattributed labels.

    ``permutation_seed`` exists for replay determinism only and must never be
    sent to the judge; ``wire_payload`` is the judge-facing serialization.
    """

    claim_id: str
    claim_text: str
    presented_labels: tuple[CWLabel, ...]
    permutation_seed: int
    sources_hidden: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "presented_labels", tuple(self.presented_labels))
        if len(self.presented_labels) not in (1, 2):
            raise ValueError("a judge case presents 1 or 2 labels")
        if not self.sources_hidden:
            raise ValueError("judge cases are always blind")

    def wire_payload(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "claim_text": self.claim_text,
            "labels": [label.value for label in self.presented_labels],
        }


def make_judge_case(
    claim_id: str,
    claim_text: str,
    human: CWLabel,
    llm_majority: CWLabel | None,
    seed: int,
) -> JudgeCase:
    """Build the blind case for a routed claim.

    With a conflicting LLM majority the pair order is a seeded uniform swap;
    with no majority only the human label is shown and the judge effectively
    annotates independently.
    """
    if llm_majority is None:
        presented: tuple[CWLabel, ...] = (human,)
    elif llm_majority == human:
        raise InconsistentCase(
            f"{claim_id}: human and LLM majority agree ({human.value}); "
            "reconciliation would have accepted this claim"
        )
    else:
        pair = [human, llm_majority]
        if random.Random(seed).random() < 0.5:
            pair.reverse()
        presented = tuple(pair)
    return JudgeCase(
        claim_id=claim_id,
        claim_text=claim_text,
        presented_labels=presented,
        permutation_seed=seed,
    )


def adjudicate(
    case: JudgeCase,
    human: CWLabel,
    llm_majority: CWLabel | None,
    judge: CWLabel,
) -> FinalLabelRecord:
    """The judge's label becomes gold; provenance records whom they sided with."""
    if llm_majority is None:
        provenance = (
            ProvenanceCategory.JUDGE_SIDED_HUMAN
            if judge == human
            else ProvenanceCategory.JUDGE_INDEPENDENT
        )
    elif judge == human:
        provenance = ProvenanceCategory.JUDGE_SIDED_HUMAN
    elif judge == llm_majority:
        provenance = ProvenanceCategory.JUDGE_SIDED_LLM
    else:
        provenance = ProvenanceCategory.JUDGE_OVERRIDE
    return FinalLabelRecord(claim_id=case.claim_id, gold=judge, provenance=provenance)
