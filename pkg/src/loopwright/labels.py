"""Label taxonomies and the binary collapse.

Enum values are the wire strings used in prompts, constrained decoding, and
JSONL files; enum names double as the short display aliases (CFS/UFS/NFS).
"""

from __future__ import annotations

from enum import Enum


class CWLabel(Enum):
    """Three-class check-worthiness label."""

    CFS = "Check-worthy Factual"
    UFS = "Unimportant Factual"
    NFS = "Non-Factual"

    def __str__(self) -> str:
        return self.value


class BinaryCWLabel(Enum):
    """Two-class formulation: CFS vs everything else."""

    CHECK_WORTHY = "Check-worthy"
    NON_CHECK_WORTHY = "Non-Check-worthy"

    def __str__(self) -> str:
        return self.value


class HSLabel(Enum):
    """Binary hate-speech label."""

    HATEFUL = "hateful"
    NON_HATEFUL = "non-hateful"

    def __str__(self) -> str:
        return self.value


class PromptMode(Enum):
    """How a model was prompted; humans carry NOT_APPLICABLE."""

    ZERO_SHOT = "zero"
    ONE_SHOT = "one"
    NOT_APPLICABLE = "none"


class ArgumentRole(Enum):
    PREMISE = "premise"
    CONCLUSION = "conclusion"
    UNMARKED = "unmarked"


class AnnotatorKind(Enum):
    HUMAN = "human"
    MODEL = "model"
    JUDGE = "judge"


class SizeClass(Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


class ProvenanceCategory(Enum):
    """How a gold label came to be."""

    ACCEPTED = "accepted"
    JUDGE_SIDED_HUMAN = "judge_sided_human"
    JUDGE_SIDED_LLM = "judge_sided_llm"
    JUDGE_OVERRIDE = "judge_override"
    JUDGE_INDEPENDENT = "judge_independent"


def collapse_binary(label: CWLabel) -> BinaryCWLabel:
    """Merge NFS and UFS into a single non-check-worthy class."""
    if label is CWLabel.CFS:
        return BinaryCWLabel.CHECK_WORTHY
    return BinaryCWLabel.NON_CHECK_WORTHY
