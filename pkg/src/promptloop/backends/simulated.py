"""Deterministic simulated world backend.

The world declares symbolic elements with satisfaction probabilities. A
"visual" is the satisfaction set drawn for a (prompt, seed) pair, encoded in
its URI, so every capability can read it back without shared state. All
randomness is keyed (see ``promptloop.rng``): reordering jobs cannot change
outcomes, and a fixed (world_seed, run_seed) replays byte-identically.

Seed affinity models noise conditions that favor alignment: a per-seed
quality factor scales each element's satisfaction probability by
``1 - spread * (1 - quality)``. Regenerating with a reused seed draws fresh
satisfaction (the prompt changed) under the same affinity. Prompt emphasis is
parsed from marker clauses; the emphasis budget splits evenly across the
emphasized elements, so piling on targets dilutes each one.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .. import rng
from ..core import (
    MOTION_CATEGORIES,
    Importance,
    Label,
    PromptRecord,
    SemanticCategory,
    SemanticElement,
    VisualHandle,
)
from ..errors import BackendError
from ..instructions import DEFAULT_INSTRUCTIONS

_EMPHASIS_MARKERS = ("emphasize:", "make sure:")


@dataclass(frozen=True)
class SimElementSpec:
    """One declared world element and its generation behavior."""

    element_id: int
    text: str
    importance: str = "core"
    semantic_category: str = "object_presence"
    base_prob: float = 1.0
    emphasis_gain: float = 0.0
    seed_affinity_spread: float = 0.0
    evidence_phrases: tuple[str, ...] = ()
    conflict_phrases: tuple[str, ...] = ()
    probe_question: str | None = None

    def __post_init__(self) -> None:
        for name in ("base_prob", "emphasis_gain", "seed_affinity_spread"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    @property
    def positives(self) -> tuple[str, ...]:
        return self.evidence_phrases or (self.text,)

    @property
    def negatives(self) -> tuple[str, ...]:
        return self.conflict_phrases or (f"no {self.text}", f"not {self.text}")

    def question(self) -> str:
        return self.probe_question or f"what does the scene show regarding {self.text}?"

    def to_element(self) -> SemanticElement:
        return SemanticElement(
            element_id=self.element_id,
            text=self.text,
            importance=Importance(self.importance),
            semantic_category=SemanticCategory(self.semantic_category),
            probe_question=self.question(),
        )


@dataclass(frozen=True)
class SimWorld:
    world_seed: int
    elements: tuple[SimElementSpec, ...]
    media_kind: str = "image"
    frame_count: int = 1
    caption_omission_prob: float = 0.0
    reward_noise: float = 0.0
    vqa_yes_bias: float = 0.0
    # exponent shaping the per-seed quality factor: quality = u**power, so
    # power > 1 makes favorable noise conditions rare
    seed_quality_power: float = 1.0
    # attention crowd-out: emphasizing |E| of n elements scales every
    # non-emphasized element's base probability by (1 - crowding * |E| / n),
    # so revisions that chase many targets degrade the content that worked
    emphasis_crowding: float = 0.0

    def __post_init__(self) -> None:
        if self.seed_quality_power <= 0:
            raise ValueError("seed_quality_power must be positive")
        if not 0.0 <= self.emphasis_crowding <= 1.0:
            raise ValueError("emphasis_crowding must lie in [0, 1]")
        ids = [spec.element_id for spec in self.elements]
        if ids != list(range(len(self.elements))) or not ids:
            raise ValueError("world elements need contiguous ids starting at 0")
        texts = [spec.text for spec in self.elements]
        if len(set(texts)) != len(texts):
            raise ValueError("world element texts must be pairwise distinct")
        if self.media_kind == "image":
            for spec in self.elements:
                if SemanticCategory(spec.semantic_category) in MOTION_CATEGORIES:
                    raise ValueError("image worlds cannot declare motion-level elements")
        for name in ("caption_omission_prob", "vqa_yes_bias"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def fingerprint(self) -> str:
        h = hashlib.blake2b(digest_size=8)
        h.update(str(self.world_seed).encode())
        for spec in self.elements:
            h.update(repr((spec.element_id, spec.text, spec.importance,
                           spec.base_prob, spec.emphasis_gain,
                           spec.seed_affinity_spread)).encode())
        h.update(repr((self.media_kind, self.caption_omission_prob,
                       self.reward_noise, self.vqa_yes_bias,
                       self.seed_quality_power, self.emphasis_crowding)).encode())
        return h.hexdigest()

    def base_prompt_text(self) -> str:
        return "; ".join(spec.text for spec in self.elements) + "."

    def seed_quality(self, seed: int) -> float:
        unit = rng.hash_unit(self.world_seed, "seed-quality", seed)
        return unit ** self.seed_quality_power

    def affinity(self, seed: int, element_id: int) -> float:
        spread = self.elements[element_id].seed_affinity_spread
        return 1.0 - spread * (1.0 - self.seed_quality(seed))

    def emphasis_vector(self, prompt_text: str) -> tuple[float, ...]:
        """Emphasized-element weights parsed from marker clauses.

        The budget is 1.0 split evenly over the emphasized set.
        """
        lowered = prompt_text.lower()
        segments: list[str] = []
        for marker in _EMPHASIS_MARKERS:
            start = 0
            while True:
                idx = lowered.find(marker, start)
                if idx < 0:
                    break
                end = lowered.find(".", idx)
                segments.append(lowered[idx + len(marker): end if end >= 0 else len(lowered)])
                start = idx + len(marker)
        emphasized = {
            spec.element_id
            for spec in self.elements
            if any(spec.text.lower() in segment for segment in segments)
        }
        if not emphasized:
            return tuple(0.0 for _ in self.elements)
        share = 1.0 / len(emphasized)
        return tuple(share if spec.element_id in emphasized else 0.0 for spec in self.elements)

    def effective_prob(
        self, element_id: int, emphasis: float, seed: int, emphasized_count: int = 0
    ) -> float:
        spec = self.elements[element_id]
        base = spec.base_prob
        if emphasis > 0.0:
            base = base + spec.emphasis_gain * emphasis * (1.0 - base)
        elif emphasized_count:
            base = base * (1.0 - self.emphasis_crowding * emphasized_count / len(self.elements))
        base = min(max(base, 0.0), 1.0)
        return min(max(base * self.affinity(seed, element_id), 0.0), 1.0)

    def draw_satisfaction(self, prompt_text: str, seed: int) -> tuple[bool, ...]:
        emphasis = self.emphasis_vector(prompt_text)
        emphasized_count = sum(1 for share in emphasis if share > 0.0)
        return tuple(
            rng.hash_unit(self.world_seed, "satisfy", seed, spec.element_id, prompt_text)
            < self.effective_prob(
                spec.element_id, emphasis[spec.element_id], seed, emphasized_count
            )
            for spec in self.elements
        )

    # --- symbolic visual handles -----------------------------------------

    def make_visual(self, satisfied: Sequence[bool], seed: int, tag: str = "") -> VisualHandle:
        bits = "".join("1" if flag else "0" for flag in satisfied)
        suffix = f":{tag}" if tag else ""
        uri = f"sim:{self.fingerprint}:{self.media_kind}:{bits}:{seed:016x}{suffix}"
        return VisualHandle(media_kind=self.media_kind, frame_count=self.frame_count, uri=uri)

    def satisfied_from_uri(self, uri: str) -> tuple[bool, ...]:
        parts = uri.split(":")
        if len(parts) < 5 or parts[0] != "sim":
            raise BackendError(f"not a simulated visual: {uri!r}")
        if parts[1] != self.fingerprint:
            raise BackendError(f"visual {uri!r} belongs to a different world")
        bits = parts[3]
        if len(bits) != len(self.elements) or set(bits) - {"0", "1"}:
            raise BackendError(f"visual {uri!r} carries a malformed satisfaction set")
        return tuple(ch == "1" for ch in bits)

    def satisfied_count(self, uri: str) -> int:
        return sum(self.satisfied_from_uri(uri))

    # --- world construction ----------------------------------------------

    def to_payload(self) -> dict:
        return {
            "world_seed": self.world_seed,
            "media_kind": self.media_kind,
            "frame_count": self.frame_count,
            "caption_omission_prob": self.caption_omission_prob,
            "reward_noise": self.reward_noise,
            "vqa_yes_bias": self.vqa_yes_bias,
            "seed_quality_power": self.seed_quality_power,
            "emphasis_crowding": self.emphasis_crowding,
            "elements": [
                {
                    "element_id": spec.element_id,
                    "text": spec.text,
                    "importance": spec.importance,
                    "semantic_category": spec.semantic_category,
                    "base_prob": spec.base_prob,
                    "emphasis_gain": spec.emphasis_gain,
                    "seed_affinity_spread": spec.seed_affinity_spread,
                    "evidence_phrases": list(spec.evidence_phrases),
                    "conflict_phrases": list(spec.conflict_phrases),
                    "probe_question": spec.probe_question,
                }
                for spec in self.elements
            ],
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "SimWorld":
        elements = tuple(
            SimElementSpec(
                element_id=item["element_id"],
                text=item["text"],
                importance=item.get("importance", "core"),
                semantic_category=item.get("semantic_category", "object_presence"),
                base_prob=item.get("base_prob", 1.0),
                emphasis_gain=item.get("emphasis_gain", 0.0),
                seed_affinity_spread=item.get("seed_affinity_spread", 0.0),
                evidence_phrases=tuple(item.get("evidence_phrases", ())),
                conflict_phrases=tuple(item.get("conflict_phrases", ())),
                probe_question=item.get("probe_question"),
            )
            for item in payload["elements"]
        )
        return cls(
            world_seed=payload["world_seed"],
            elements=elements,
            media_kind=payload.get("media_kind", "image"),
            frame_count=payload.get("frame_count", 1),
            caption_omission_prob=payload.get("caption_omission_prob", 0.0),
            reward_noise=payload.get("reward_noise", 0.0),
            vqa_yes_bias=payload.get("vqa_yes_bias", 0.0),
            seed_quality_power=payload.get("seed_quality_power", 1.0),
            emphasis_crowding=payload.get("emphasis_crowding", 0.0),
        )


class SimulatedCapabilities:
    """All seven capabilities over one shared SimWorld."""

    def __init__(self, world: SimWorld, instructions: Mapping[str, str] | None = None):
        self.world = world
        self.instructions = dict(instructions or DEFAULT_INSTRUCTIONS)
        self.fingerprint = f"simulated/{world.fingerprint}"

    # generator ------------------------------------------------------------

    def generate(
        self,
        prompt: PromptRecord,
        seed: int,
        steps: int,
        cfg_enabled: bool,
        sampler_options: Mapping[str, Any] | None = None,
    ) -> VisualHandle:
        del steps, cfg_enabled, sampler_options  # symbolic worlds have no trajectory
        satisfied = self.world.draw_satisfaction(prompt.text, seed)
        return self.world.make_visual(satisfied, seed)

    # captioner ------------------------------------------------------------

    def caption(self, visual: VisualHandle) -> str:
        satisfied = self.world.satisfied_from_uri(visual.uri)
        shown: list[str] = []
        for spec in self.world.elements:
            if not satisfied[spec.element_id]:
                continue
            omit = rng.hash_unit(self.world.world_seed, "omit", visual.uri, spec.element_id)
            if omit < self.world.caption_omission_prob:
                continue
            shown.append(spec.positives[0])
        lead = "The video shows, over time," if visual.media_kind == "video" else "The image shows"
        if not shown:
            return f"{lead} an otherwise empty scene."
        return f"{lead} {'; '.join(shown)}."

    # prober ---------------------------------------------------------------

    def probe(self, visual: VisualHandle, question: str, instruction_id: str) -> str:
        satisfied = self.world.satisfied_from_uri(visual.uri)
        spec = self._element_for_question(question)
        if "binary" in instruction_id:
            if spec is None:
                return "no"
            if satisfied[spec.element_id]:
                return "yes"
            bias = rng.hash_unit(self.world.world_seed, "vqa", visual.uri, spec.element_id)
            return "yes" if bias < self.world.vqa_yes_bias else "no"
        if spec is None:
            return "the scene shows nothing matching the question"
        if satisfied[spec.element_id]:
            return spec.positives[0]
        return spec.negatives[0]

    def _element_for_question(self, question: str) -> SimElementSpec | None:
        lowered = question.lower()
        for spec in self.world.elements:
            if spec.question().lower() == lowered:
                return spec
        for spec in self.world.elements:
            if spec.text.lower() in lowered:
                return spec
        return None

    # nli ------------------------------------------------------------------

    def judge(self, premise: str, hypothesis: str) -> Label:
        premise_l = premise.lower()
        hypothesis_l = hypothesis.lower().rstrip(".")
        spec = next(
            (s for s in self.world.elements if s.text.lower() == hypothesis_l), None
        )
        if spec is not None:
            if any(phrase.lower() in premise_l for phrase in spec.negatives):
                return Label.CONTRADICTION
            if any(phrase.lower() in premise_l for phrase in spec.positives):
                return Label.ENTAILMENT
            return Label.NEUTRAL
        # free-text fallback: plain symbolic containment
        if f"not {hypothesis_l}" in premise_l or f"no {hypothesis_l}" in premise_l:
            return Label.CONTRADICTION
        if hypothesis_l in premise_l:
            return Label.ENTAILMENT
        return Label.NEUTRAL

    # decomposer -----------------------------------------------------------

    def decompose(self, prompt: PromptRecord, media_kind: str) -> list[SemanticElement]:
        del prompt, media_kind  # the simulated decomposer echoes the declared elements
        return [spec.to_element() for spec in self.world.elements]

    # rewriter -------------------------------------------------------------

    def rewrite(self, instruction_id: str, payload: Mapping[str, Any]) -> str:
        parent = strip_emphasis(payload["parent_text"])
        variant_index = int(payload.get("variant_index", 0))
        attempt = int(payload.get("attempt", 1))
        texts = {int(item["element_id"]): item["text"] for item in payload.get("elements", ())}
        marker = "Make sure" if attempt > 1 else "Emphasize"
        tag = f" (take {variant_index + 1})" if variant_index > 0 else ""
        if "failure_targeted" in instruction_id or "per_sample" in instruction_id:
            failures = [texts[int(eid)] for eid in payload.get("failure_ids", ())]
            clause = "; ".join(failures)
            return f"{parent} {marker}: {clause}.{tag}".strip()
        if "exploration" in instruction_id:
            return f"A rendering of: {parent} (variation {variant_index + 1}, attempt {attempt})"
        if "standard_expansion" in instruction_id:
            return f"{parent} Rendered with rich, coherent detail and balanced lighting.{tag}"
        raise BackendError(f"unknown rewrite instruction {instruction_id!r}", capability="rewriter")

    # reward ---------------------------------------------------------------

    def score(self, original_prompt: PromptRecord, visual: VisualHandle) -> float:
        del original_prompt  # simulated reward reads true satisfaction
        count = self.world.satisfied_count(visual.uri)
        if self.world.reward_noise == 0.0:
            return float(count)
        jitter = rng.hash_unit(self.world.world_seed, "reward", visual.uri) - 0.5
        return count + self.world.reward_noise * jitter


_MARKER_RE = re.compile(
    r"\s*(?:Emphasize|Make sure):[^.]*\.?|\s*\(take \d+\)|\s*\(variation \d+(?:, attempt \d+)?\)",
    re.IGNORECASE,
)


def strip_emphasis(text: str) -> str:
    """Remove emphasis clauses and variant tags added by earlier revisions."""
    stripped = _MARKER_RE.sub("", text)
    prefix = "A rendering of: "
    if stripped.startswith(prefix):
        stripped = stripped[len(prefix):]
    return stripped.strip()
