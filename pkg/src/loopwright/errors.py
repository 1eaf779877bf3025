"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LoopwrightError(Exception):
    """Base class for all package-specific errors."""


class EmptyInput(LoopwrightError):
    """A prompt builder received empty or whitespace-only text."""


class MissingCWLabel(LoopwrightError):
    """A claim needed a check-worthiness label but none was provided."""


class InvalidModelOutput(LoopwrightError):
    """A model completion did not match any allowed output label."""


class EndpointUnavailable(LoopwrightError):
    """A model or moderation endpoint could not be reached."""


class OutputNeverValid(LoopwrightError):
    """One sampling slot kept producing invalid outputs until retries ran out."""

    def __init__(self, slot: int, attempts: int, last_output: str):
        self.slot = slot
        self.attempts = attempts
        self.last_output = last_output
        super().__init__(
            f"slot {slot}: no valid label after {attempts} attempts "
            f"(last output: {last_output!r})"
        )


class UnknownModel(LoopwrightError):
    """A registry key does not exist in the model registry."""


class InconsistentCase(LoopwrightError):
    """A judge case was requested for labels that never disagree."""


class NoCommonItems(LoopwrightError):
    """Two raters share no commonly labeled items."""


class DegenerateDistribution(LoopwrightError):
    """Chance agreement is 1, so kappa is undefined."""


class UndefinedAlpha(LoopwrightError):
    """Krippendorff's alpha is undefined (no pairable values or zero expected disagreement)."""


class LengthMismatch(LoopwrightError):
    """Paired label sequences have different lengths."""


class ItemSetMismatch(LoopwrightError):
    """Two label tracks do not cover the same claim set."""


class MissingScores(LoopwrightError):
    """Moderation scores are missing for one or more messages."""


class CorpusParseError(LoopwrightError):
    """A corpus line failed to parse."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class CorpusValidationError(LoopwrightError):
    """A message failed validation at ingest."""

    def __init__(self, message_id: str, problems: list[str]):
        self.message_id = message_id
        self.problems = problems
        super().__init__(f"message {message_id}: " + "; ".join(problems))


class DuplicateAnnotation(LoopwrightError):
    """An annotation event with the same (claim, source, run, mode) key already exists."""


class IncompleteTrack(LoopwrightError):
    """A label track is missing records for some claims."""

    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__(f"{len(missing)} claims lack a final label: {missing[:5]}")


class CorruptLog(LoopwrightError):
    """An event log line failed to parse; the prefix before it is recoverable."""

    def __init__(self, position: int, reason: str, recovered: list[dict]):
        self.position = position
        self.reason = reason
        self.recovered = recovered
        super().__init__(f"corrupt event at line {position}: {reason}")


class Unauthorized(LoopwrightError):
    """The caller's token does not authorize the requested role."""


class NotLeaseHolder(LoopwrightError):
    """A submission came from someone other than the live lease holder."""


class LeaseExpired(LoopwrightError):
    """The lease TTL elapsed before submission."""


class WrongLabelSpace(LoopwrightError):
    """A submitted label does not belong to the task's label space."""
