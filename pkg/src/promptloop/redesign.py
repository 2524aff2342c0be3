"""Prompt revision: failure-targeted redesign plus the contrast baselines.

The rewriter backend produces text; the engine enforces the contract. A
failure-targeted variant must entail every common-failure element and every
satisfied core element (checked with the NLI backend, variant as premise);
expansion and exploration variants must entail all original elements. A
variant that fails validation gets one regeneration attempt, then the
revision errors out.

Reward models always score against the original user prompt, never revised
text; revision therefore never mutates the parent record, and the lineage
stays retrievable through provenance.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .backends.base import BackendSet
from .core import (
    Importance,
    Label,
    PromptRecord,
    Provenance,
    SemanticElement,
    VerificationReport,
)
from .errors import UnfaithfulRevision
from .instructions import DEFAULT_INSTRUCTIONS


class RevisionMode(str, Enum):
    FAILURE_TARGETED = "failure_targeted"
    EXPLORATION = "exploration"
    STANDARD_EXPANSION = "standard_expansion"
    PER_SAMPLE = "per_sample"


_MODE_INSTRUCTION = {
    RevisionMode.FAILURE_TARGETED: "rewrite_failure_targeted",
    RevisionMode.EXPLORATION: "rewrite_exploration",
    RevisionMode.STANDARD_EXPANSION: "rewrite_standard_expansion",
    RevisionMode.PER_SAMPLE: "rewrite_per_sample",
}


@dataclass(frozen=True)
class RevisionRequest:
    parent: PromptRecord
    elements: tuple[SemanticElement, ...]
    common_failures: tuple[int, ...]
    satisfied: tuple[int, ...]
    mode: RevisionMode
    variant_count: int = 1
    per_sample_report: VerificationReport | None = None
    iteration: int = 1

    def __post_init__(self) -> None:
        if self.variant_count < 1:
            raise ValueError("variant_count must be positive")
        if self.mode is RevisionMode.FAILURE_TARGETED and not self.common_failures:
            raise ValueError("failure-targeted revision needs at least one common failure")
        if self.mode is RevisionMode.EXPLORATION and self.common_failures:
            raise ValueError("exploration revision must carry no common failures")
        if (self.per_sample_report is not None) != (self.mode is RevisionMode.PER_SAMPLE):
            raise ValueError("per_sample_report is required iff mode is per_sample")


@dataclass(frozen=True)
class RevisionResult:
    variants: tuple[PromptRecord, ...]
    rewriter_fingerprint: str


class Redesigner:
    def __init__(self, backends: BackendSet, instructions: dict[str, str] | None = None):
        self.backends = backends
        self.instructions = dict(instructions or DEFAULT_INSTRUCTIONS)

    # --- core revision -------------------------------------------------------

    def revise(self, request: RevisionRequest) -> RevisionResult:
        by_id = {e.element_id: e for e in request.elements}
        failure_ids = (
            request.per_sample_report.contradicted_ids()
            if request.mode is RevisionMode.PER_SAMPLE
            else frozenset(request.common_failures)
        )
        variants = []
        for index in range(request.variant_count):
            variants.append(self._one_variant(request, index, sorted(failure_ids), by_id))
        return RevisionResult(
            variants=tuple(variants),
            rewriter_fingerprint=self.backends.rewriter.fingerprint,
        )

    def _one_variant(
        self,
        request: RevisionRequest,
        index: int,
        failure_ids: Sequence[int],
        by_id: dict[int, SemanticElement],
    ) -> PromptRecord:
        instruction_id = self.instructions[_MODE_INSTRUCTION[request.mode]]
        last_problem = ""
        for attempt in (1, 2):
            text = self.backends.rewriter.rewrite(
                instruction_id,
                {
                    "mode": request.mode.value,
                    "parent_text": request.parent.text,
                    "elements": [
                        {"element_id": e.element_id, "text": e.text, "importance": e.importance.value}
                        for e in request.elements
                    ],
                    "failure_ids": list(failure_ids),
                    "satisfied_ids": list(request.satisfied),
                    "variant_index": index,
                    "attempt": attempt,
                },
            )
            problem = self._validate_variant(request, text, failure_ids, by_id)
            if problem is None:
                return self._as_record(request, index, text)
            last_problem = problem
        raise UnfaithfulRevision(
            f"variant {index} of {request.parent.prompt_id} failed validation twice: {last_problem}"
        )

    def _validate_variant(
        self,
        request: RevisionRequest,
        text: str,
        failure_ids: Sequence[int],
        by_id: dict[int, SemanticElement],
    ) -> str | None:
        if not text.strip():
            return "empty variant"
        if text.strip() == request.parent.text.strip():
            return "variant does not differ from parent"
        if request.mode in (RevisionMode.FAILURE_TARGETED, RevisionMode.PER_SAMPLE):
            required = list(failure_ids) + [
                eid
                for eid in request.satisfied
                if by_id[eid].importance is Importance.CORE
            ]
        else:
            required = [e.element_id for e in request.elements]
        for eid in required:
            element = by_id[eid]
            label = self.backends.nli.judge(text, element.text)
            if label is not Label.ENTAILMENT:
                return f"variant does not entail element {eid} ({element.text!r}): {label.value}"
        return None

    def _as_record(self, request: RevisionRequest, index: int, text: str) -> PromptRecord:
        if request.mode is RevisionMode.STANDARD_EXPANSION:
            prompt_id = f"{request.parent.prompt_id}/expanded"
            provenance = Provenance(kind="expanded", parent_id=request.parent.prompt_id)
        else:
            prompt_id = f"{request.parent.prompt_id}/r{request.iteration}v{index}"
            provenance = Provenance(
                kind="revised", iteration=request.iteration, parent_id=request.parent.prompt_id
            )
        return PromptRecord(
            prompt_id=prompt_id,
            text=text,
            category=request.parent.category,
            provenance=provenance,
        )

    # --- baselines -------------------------------------------------------------

    def standard_expand(self, prompt: PromptRecord, elements: Sequence[SemanticElement]) -> PromptRecord:
        """Failure-blind enrichment with generic detail."""
        request = RevisionRequest(
            parent=prompt,
            elements=tuple(elements),
            common_failures=(),
            satisfied=tuple(e.element_id for e in elements),
            mode=RevisionMode.STANDARD_EXPANSION,
            variant_count=1,
        )
        return self.revise(request).variants[0]

    def revise_per_sample(
        self,
        prompt: PromptRecord,
        report: VerificationReport,
        elements: Sequence[SemanticElement],
        iteration: int = 1,
        index: int = 0,
    ) -> PromptRecord:
        """One variant targeting exactly this sample's contradicted elements."""
        if not report.contradicted_ids():
            return prompt  # nothing to fix
        request = RevisionRequest(
            parent=prompt,
            elements=tuple(elements),
            common_failures=(),
            satisfied=tuple(sorted(report.entailed_ids())),
            mode=RevisionMode.PER_SAMPLE,
            variant_count=1,
            per_sample_report=report,
            iteration=iteration,
        )
        variant = self.revise(request).variants[0]
        # several per-sample variants share a parent, so ids carry the index
        return PromptRecord(
            prompt_id=f"{prompt.prompt_id}/r{iteration}ps{index}",
            text=variant.text,
            category=variant.category,
            provenance=variant.provenance,
        )
