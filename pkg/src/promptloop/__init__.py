"""Inference-time scaling for text-to-visual generation.

Generate a pool of candidates, verify each prompt element against the
visuals, diagnose failures that recur across the pool, redesign the prompt
to reinforce them, and regenerate on the best-performing seeds — all over
pluggable model backends, including a fully deterministic simulated backend.
"""

from . import bench, selection, verifier  # noqa: F401  (register record codecs)
from .backends import (
    BackendProfile,
    BackendSet,
    SimElementSpec,
    SimWorld,
    build_backends,
    simulated_profile,
)
from .config import BudgetLedger, RegenerationPlan, RunConfig, compute_nfe, make_run_config
from .core import (
    AlignmentScore,
    Candidate,
    Importance,
    Label,
    Ordering,
    PromptRecord,
    Provenance,
    SemanticCategory,
    SemanticElement,
    Stage,
    Verdict,
    VerificationReport,
    VisualHandle,
    best_candidate,
    compare_scores,
    score_report,
)
from .orchestrator import Orchestrator, RunResult, plan_regeneration, replay, run_with_profile
from .redesign import Redesigner, RevisionMode, RevisionRequest, RevisionResult
from .selection import FailureDiagnosis, TopKSelection, diagnose, select_top_k
from .verifier import DecompositionResult, NliQuery, Verifier

__version__ = "0.1.0"

__all__ = [
    "AlignmentScore",
    "BackendProfile",
    "BackendSet",
    "BudgetLedger",
    "Candidate",
    "DecompositionResult",
    "FailureDiagnosis",
    "Importance",
    "Label",
    "NliQuery",
    "Orchestrator",
    "Ordering",
    "PromptRecord",
    "Provenance",
    "Redesigner",
    "RegenerationPlan",
    "RevisionMode",
    "RevisionRequest",
    "RevisionResult",
    "RunConfig",
    "RunResult",
    "SemanticCategory",
    "SemanticElement",
    "SimElementSpec",
    "SimWorld",
    "Stage",
    "TopKSelection",
    "Verdict",
    "VerificationReport",
    "Verifier",
    "VisualHandle",
    "best_candidate",
    "build_backends",
    "compare_scores",
    "compute_nfe",
    "diagnose",
    "make_run_config",
    "plan_regeneration",
    "replay",
    "run_with_profile",
    "score_report",
    "select_top_k",
    "simulated_profile",
]
