"""Element-level alignment verification.

Pipeline per candidate: caption the visual once, judge each prompt element
against the caption as a text-to-text entailment query, and resolve neutral
verdicts by asking the element's open-ended probe question and judging the
free-form answer in a second entailment step. A residual neutral at the
probe stage is coerced to contradiction and flagged, so reports never carry
neutral final labels.

Decompositions and captions are cached by fingerprint: verifying many
candidates of one prompt reuses one decomposition, and captioning dominates
verification cost, so repeat captions are free.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Sequence

from . import records
from .backends.base import BackendSet
from .core import (
    MOTION_CATEGORIES,
    Label,
    PromptRecord,
    SemanticElement,
    Stage,
    Verdict,
    VerificationReport,
    VisualHandle,
    check_contiguous,
    is_open_ended,
)
from .errors import BackendError, DegenerateAnswer, EmptyCaption, EmptyDecomposition

logger = logging.getLogger(__name__)

# Soft telemetry band for decomposition cardinality; prompts in the wild
# average a handful of elements, so counts far outside hint at a misbehaving
# decomposer without being an error.
ELEMENT_COUNT_SOFT_BAND = (1, 24)


@dataclass(frozen=True)
class DecompositionResult:
    prompt_id: str
    elements: tuple[SemanticElement, ...]
    decomposer_fingerprint: str

    def __post_init__(self) -> None:
        if not self.elements:
            raise ValueError("a decomposition needs at least one element")
        check_contiguous(self.elements)
        texts = [e.text for e in self.elements]
        if len(set(texts)) != len(texts):
            raise ValueError("element texts must be pairwise distinct")
        for element in self.elements:
            if element.probe_question is None:
                raise ValueError(
                    f"element {element.element_id} lacks a probe question; "
                    "questions are generated eagerly at decomposition time"
                )

    def element_ids(self) -> frozenset[int]:
        return frozenset(e.element_id for e in self.elements)


@dataclass(frozen=True)
class NliQuery:
    premise: str
    hypothesis: str
    stage: Stage

    def __post_init__(self) -> None:
        if not self.premise or not self.hypothesis:
            raise ValueError("premise and hypothesis must be nonempty")


def _decomposition_to(d: DecompositionResult) -> dict:
    return {
        "prompt_id": d.prompt_id,
        "elements": [records.to_record(e) for e in d.elements],
        "decomposer_fingerprint": d.decomposer_fingerprint,
    }


def _decomposition_from(payload: dict) -> DecompositionResult:
    return DecompositionResult(
        prompt_id=payload["prompt_id"],
        elements=tuple(records.from_record(e) for e in payload["elements"]),
        decomposer_fingerprint=payload["decomposer_fingerprint"],
    )


records.register("decomposition", DecompositionResult, _decomposition_to, _decomposition_from)


class Verifier:
    """Element-level verification over a backend set, with caches."""

    def __init__(self, backends: BackendSet, probe_neutrals: bool = True):
        self.backends = backends
        self.probe_neutrals = probe_neutrals
        self._decomposition_cache: dict[tuple[str, str], DecompositionResult] = {}
        self._caption_cache: dict[tuple[str, str], str] = {}
        self._lock = threading.Lock()

    # --- decomposition -----------------------------------------------------

    def decompose(self, prompt: PromptRecord, media_kind: str) -> DecompositionResult:
        fingerprint = self.backends.decomposer.fingerprint
        key = (prompt.prompt_id, fingerprint)
        with self._lock:
            cached = self._decomposition_cache.get(key)
        if cached is not None:
            return cached
        elements = tuple(self.backends.decomposer.decompose(prompt, media_kind))
        if not elements:
            raise EmptyDecomposition(
                f"decomposer returned zero elements for {prompt.prompt_id}",
                capability="decomposer",
            )
        if media_kind == "image":
            motion = [e.element_id for e in elements if e.semantic_category in MOTION_CATEGORIES]
            if motion:
                raise BackendError(
                    f"decomposer emitted motion-level elements {motion} for an image prompt",
                    capability="decomposer",
                )
        lo, hi = ELEMENT_COUNT_SOFT_BAND
        if not lo <= len(elements) <= hi:
            logger.warning(
                "decomposition of %s has %d elements, outside the expected band %s",
                prompt.prompt_id, len(elements), ELEMENT_COUNT_SOFT_BAND,
            )
        result = DecompositionResult(
            prompt_id=prompt.prompt_id,
            elements=elements,
            decomposer_fingerprint=fingerprint,
        )
        with self._lock:
            self._decomposition_cache[key] = result
        return result

    # --- captioning ---------------------------------------------------------

    def caption(self, visual: VisualHandle) -> str:
        key = (visual.uri, self.backends.captioner.fingerprint)
        with self._lock:
            cached = self._caption_cache.get(key)
        if cached is not None:
            return cached
        text = self.backends.captioner.caption(visual)
        if not text:
            raise EmptyCaption("captioner returned an empty caption", capability="captioner")
        with self._lock:
            self._caption_cache[key] = text
        return text

    # --- entailment ----------------------------------------------------------

    def nli_judge(self, query: NliQuery) -> Verdict:
        label = self.backends.nli.judge(query.premise, query.hypothesis)
        return Verdict(label=label, stage=query.stage, evidence=query.premise)

    # --- probing -------------------------------------------------------------

    def probe(self, visual: VisualHandle, question: str) -> str:
        if not is_open_ended(question):
            raise DegenerateAnswer(
                f"probe question is closed-ended: {question!r}", capability="prober"
            )
        instruction_id = self._probe_instruction()
        answer = self.backends.prober.probe(visual, question, instruction_id)
        if _is_bare_yes_no(answer):
            # one retry, asking the backend to elaborate
            answer = self.backends.prober.probe(
                visual, question + " Describe what is shown instead of yes or no.", instruction_id
            )
            if _is_bare_yes_no(answer):
                raise DegenerateAnswer(
                    f"prober answered a bare yes/no twice for {question!r}",
                    capability="prober",
                )
        if not answer:
            raise DegenerateAnswer("prober returned an empty answer", capability="prober")
        return answer

    def _probe_instruction(self) -> str:
        instructions = getattr(self.backends.prober, "instructions", None)
        if isinstance(instructions, dict) and "probe_open" in instructions:
            return instructions["probe_open"]
        return "probe_open.v1"

    # --- the full pipeline -----------------------------------------------------

    def verify(
        self,
        prompt_elements: DecompositionResult,
        visual: VisualHandle,
        candidate_id: str | None = None,
    ) -> VerificationReport:
        caption = self.caption(visual)
        verdicts: list[tuple[int, Verdict]] = []
        for element in prompt_elements.elements:
            verdict = self.nli_judge(
                NliQuery(premise=caption, hypothesis=element.text, stage=Stage.CAPTION_NLI)
            )
            if verdict.label is Label.NEUTRAL:
                verdict = self._resolve_neutral(element, visual, caption)
            verdicts.append((element.element_id, verdict))
        return VerificationReport(
            candidate_id=candidate_id if candidate_id is not None else visual.uri,
            per_element=tuple(verdicts),
            caption=caption,
        )

    def _resolve_neutral(
        self, element: SemanticElement, visual: VisualHandle, caption: str
    ) -> Verdict:
        if not self.probe_neutrals:
            # caption-only operation: a neutral cannot stand, so it falls to
            # contradiction, flagged as coerced
            return Verdict(
                label=Label.CONTRADICTION,
                stage=Stage.CAPTION_NLI,
                evidence=caption,
                coerced=True,
            )
        answer = self.probe(visual, element.probe_question)
        verdict = self.nli_judge(
            NliQuery(premise=answer, hypothesis=element.text, stage=Stage.PROBE_NLI)
        )
        if verdict.label is Label.NEUTRAL:
            # a second neutral resolves conservatively: failure, not alignment
            return Verdict(
                label=Label.CONTRADICTION,
                stage=Stage.PROBE_NLI,
                evidence=verdict.evidence,
                coerced=True,
            )
        return verdict


def probe_audit(
    report: VerificationReport, elements: Sequence[SemanticElement]
) -> list[dict]:
    """Per-element probe trail: question asked and free-form answer used."""
    by_id = {e.element_id: e for e in elements}
    trail = []
    for eid, verdict in report.per_element:
        if verdict.stage is Stage.PROBE_NLI:
            trail.append(
                {
                    "element_id": eid,
                    "question": by_id[eid].probe_question,
                    "answer": verdict.evidence,
                    "label": verdict.label.value,
                    "coerced": verdict.coerced,
                }
            )
    return trail


def _is_bare_yes_no(answer: str) -> bool:
    return answer.strip().strip(".!").lower() in ("yes", "no")
