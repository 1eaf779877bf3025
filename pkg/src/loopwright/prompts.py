"""Prompt construction for both annotation tasks.

Builders are pure functions: identical inputs yield byte-identical bundles.
The label strings embedded here are the wire contract for constrained decoding
and for ``parse_label``; do not edit them without versioning the schemas.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyInput, MissingCWLabel
from .labels import CWLabel, PromptMode

CW_OUTPUT_LABELS: tuple[str, ...] = (
    CWLabel.NFS.value,
    CWLabel.UFS.value,
    CWLabel.CFS.value,
)
HS_OUTPUT_LABELS: tuple[str, ...] = ("hateful", "non-hateful")

CW_SYSTEM_PROMPT = (
    "You are an expert annotator that classifies text based on their "
    "check-worthiness. Always follow the definitions exactly."
)

_CW_DEFINITIONS: tuple[tuple[str, str], ...] = (
    (
        "1.Non-Factual: Subjective text such as opinions, beliefs, declarations, "
        "or wishes. Many questions also fall into this category. These sentences "
        "do not contain any factual claim.",
        '"We should go to the southwest and go on the offensive and drive every '
        'race down into Mexico."',
    ),
    (
        "2.Unimportant Factual: Text that contain factual claims but are not "
        "important for fact-checking. The general public would not be interested "
        "in verifying them.",
        '"When I was last in South Africa, we went to Sun City and saw little '
        'black monkey children swimming."',
    ),
    (
        "3.Check-worthy Factual: Text that contain factual claims of public "
        "interest. These are the kinds of claims journalists would fact-check.",
        '"92% of abortion clinics are in black communities."',
    ),
)

HS_SYSTEM_PROMPT = (
    "You are an expert model for detecting hate speech in text messages based "
    "on the following definition of hate speech: Hate speech is considered any "
    "kind of content that conveys malevolent intentions toward a group or an "
    "individual, and motivated by inherent characteristics that are attributed "
    "to that group and shared among its members such as race, color, ethnicity, "
    "gender, sexual orientation, nationality, religion, disability, social "
    "status, health conditions, or other characteristics."
)

HS_USER_TEMPLATE = "Given this message. Classify if it is either hateful or not.\nInput: {input_text}"


class TaskKind(Enum):
    CHECK_WORTHINESS = "check_worthiness"
    HATE_SPEECH = "hate_speech"


@dataclass(frozen=True)
class PromptBundle:
    """System/user texts plus the closed set of outputs the model may emit."""

    system_text: str
    user_text: str
    allowed_outputs: tuple[str, ...]
    task_kind: TaskKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "allowed_outputs", tuple(self.allowed_outputs))
        if not self.allowed_outputs:
            raise ValueError("allowed_outputs must be non-empty")
        if len(set(self.allowed_outputs)) != len(self.allowed_outputs):
            raise ValueError("allowed_outputs must be distinct")
        expected = {
            TaskKind.CHECK_WORTHINESS: CW_OUTPUT_LABELS,
            TaskKind.HATE_SPEECH: HS_OUTPUT_LABELS,
        }[self.task_kind]
        if self.allowed_outputs != expected:
            raise ValueError(
                f"allowed_outputs for {self.task_kind.value} must be {expected}"
            )


def build_cw_prompt(claim_text: str, mode: PromptMode) -> PromptBundle:
    """Build the check-worthiness prompt for one claim.

    One-shot mode appends a fixed exemplar after each class definition; the
    same three exemplars are used for every claim.
    """
    if not claim_text.strip():
        raise EmptyInput("claim text is empty")
    if mode not in (PromptMode.ZERO_SHOT, PromptMode.ONE_SHOT):
        raise ValueError(f"unsupported prompt mode: {mode}")
    lines = ["Classify the following text into one of these categories:"]
    for definition, exemplar in _CW_DEFINITIONS:
        lines.append(definition)
        if mode is PromptMode.ONE_SHOT:
            lines.append(f"Example: {exemplar}")
    lines.append(f"Input text: '{claim_text}'")
    return PromptBundle(
        system_text=CW_SYSTEM_PROMPT,
        user_text="\n".join(lines),
        allowed_outputs=CW_OUTPUT_LABELS,
        task_kind=TaskKind.CHECK_WORTHINESS,
    )


def wrap_claims(claims: list[tuple[str, CWLabel | None]], with_cw: bool) -> str:
    """Concatenate claim texts, optionally wrapping each in its label tags.

    Tagged form: ``[<Label>] text [/<Label>]`` with a single space between
    consecutive claims; the untagged form is the plain space-joined text.
    """
    if not claims:
        raise EmptyInput("no claims to assemble")
    parts: list[str] = []
    for text, label in claims:
        if not text.strip():
            raise EmptyInput("claim text is empty")
        if not with_cw:
            parts.append(text)
            continue
        if label is None:
            raise MissingCWLabel(f"claim lacks a check-worthiness label: {text[:40]!r}")
        parts.append(f"[{label.value}] {text} [/{label.value}]")
    return " ".join(parts)


def build_hs_prompt(
    claims: list[tuple[str, CWLabel | None]], with_cw: bool
) -> PromptBundle:
    """Build the hate-speech prompt for a message given as its claims in order."""
    body = wrap_claims(claims, with_cw)
    return PromptBundle(
        system_text=HS_SYSTEM_PROMPT,
        user_text=HS_USER_TEMPLATE.format(input_text=body),
        allowed_outputs=HS_OUTPUT_LABELS,
        task_kind=TaskKind.HATE_SPEECH,
    )


_TAG_NAMES = "|".join(re.escape(label.value) for label in CWLabel)
_OPEN_TAG = re.compile(rf"\[(?:{_TAG_NAMES})\] ")
_CLOSE_TAG = re.compile(rf" \[/(?:{_TAG_NAMES})\]")


def strip_cw_tags(text: str) -> str:
    """Remove the wrapping grammar, recovering the untagged concatenation."""
    return _CLOSE_TAG.sub("", _OPEN_TAG.sub("", text))
