"""LLM-in-the-loop annotation orchestration for check-worthiness labeling."""

from .errors import LoopwrightError
from .gateway import ModelRegistry, ModelSpec, parse_label, sample_triple
from .judging import JudgeCase, adjudicate, make_judge_case
from .labels import (
    AnnotatorKind,
    ArgumentRole,
    BinaryCWLabel,
    CWLabel,
    HSLabel,
    PromptMode,
    ProvenanceCategory,
    SizeClass,
    collapse_binary,
)
from .metrics import (
    AnnotationMatrix,
    GroupComparison,
    cohens_kappa,
    compare_tracks,
    krippendorff_alpha_nominal,
    label_distribution,
    macro_prf,
    mann_whitney_u,
    percent_agreement,
    rank_biserial_r,
    variability_table,
)
from .pipeline import (
    EffortReport,
    PipelineReport,
    effort_report,
    replay_run,
    run_pipeline,
    run_platinum,
)
from .prompts import PromptBundle, build_cw_prompt, build_hs_prompt, strip_cw_tags
from .records import (
    AnnotationEvent,
    AnnotatorRef,
    ClaimRecord,
    FinalLabelRecord,
    MessageRecord,
    TripleRun,
    validate_message,
)
from .store import Dataset, export_bundle, import_bundle, import_corpus, verify_bundle
from .voting import (
    RoutingDecision,
    VariabilityClass,
    aggregate_platinum,
    classify_variability,
    majority_vote,
    reconcile,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationEvent",
    "AnnotationMatrix",
    "AnnotatorKind",
    "AnnotatorRef",
    "ArgumentRole",
    "BinaryCWLabel",
    "CWLabel",
    "ClaimRecord",
    "Dataset",
    "EffortReport",
    "FinalLabelRecord",
    "GroupComparison",
    "HSLabel",
    "JudgeCase",
    "LoopwrightError",
    "MessageRecord",
    "ModelRegistry",
    "ModelSpec",
    "PipelineReport",
    "PromptBundle",
    "PromptMode",
    "ProvenanceCategory",
    "RoutingDecision",
    "SizeClass",
    "TripleRun",
    "VariabilityClass",
    "adjudicate",
    "aggregate_platinum",
    "build_cw_prompt",
    "build_hs_prompt",
    "classify_variability",
    "cohens_kappa",
    "collapse_binary",
    "compare_tracks",
    "effort_report",
    "export_bundle",
    "import_bundle",
    "import_corpus",
    "krippendorff_alpha_nominal",
    "label_distribution",
    "macro_prf",
    "majority_vote",
    "make_judge_case",
    "mann_whitney_u",
    "parse_label",
    "percent_agreement",
    "rank_biserial_r",
    "reconcile",
    "replay_run",
    "run_pipeline",
    "run_platinum",
    "sample_triple",
    "strip_cw_tags",
    "validate_message",
    "variability_table",
    "verify_bundle",
]
