"""Capability interfaces consumed by the verifier, redesign, and orchestrator.

A backend set binds all seven capabilities; any capability may be simulated
or remote, and mixed sets are allowed. Implementations must be deterministic
per their contracts (generation keyed on prompt/seed/steps/cfg) and must
tolerate concurrent in-flight calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Protocol, Sequence, runtime_checkable

from ..core import Label, PromptRecord, SemanticElement, VisualHandle
from ..errors import InvalidLabel

CAPABILITIES = (
    "generator",
    "captioner",
    "prober",
    "nli",
    "decomposer",
    "rewriter",
    "reward",
)

# Real model outputs are ragged; normalization is the engine's job.
_LABEL_SYNONYMS: dict[str, Label] = {
    "entailment": Label.ENTAILMENT,
    "entail": Label.ENTAILMENT,
    "entails": Label.ENTAILMENT,
    "entailed": Label.ENTAILMENT,
    "supported": Label.ENTAILMENT,
    "supports": Label.ENTAILMENT,
    "yes-supports": Label.ENTAILMENT,
    "contradiction": Label.CONTRADICTION,
    "contradict": Label.CONTRADICTION,
    "contradicts": Label.CONTRADICTION,
    "contradicted": Label.CONTRADICTION,
    "refutes": Label.CONTRADICTION,
    "no-contradicts": Label.CONTRADICTION,
    "neutral": Label.NEUTRAL,
    "unknown": Label.NEUTRAL,
    "undetermined": Label.NEUTRAL,
    "insufficient": Label.NEUTRAL,
}


def normalize_label(raw: str) -> Label:
    """Map backend label text onto the closed three-label set."""
    key = raw.strip().strip(".").lower()
    label = _LABEL_SYNONYMS.get(key)
    if label is None:
        raise InvalidLabel(f"label {raw!r} not in the closed label set", capability="nli")
    return label


@runtime_checkable
class Generator(Protocol):
    fingerprint: str

    def generate(
        self,
        prompt: PromptRecord,
        seed: int,
        steps: int,
        cfg_enabled: bool,
        sampler_options: Mapping[str, Any] | None = None,
    ) -> VisualHandle: ...


@runtime_checkable
class Captioner(Protocol):
    fingerprint: str

    def caption(self, visual: VisualHandle) -> str: ...


@runtime_checkable
class Prober(Protocol):
    fingerprint: str

    def probe(self, visual: VisualHandle, question: str, instruction_id: str) -> str: ...


@runtime_checkable
class NliJudge(Protocol):
    fingerprint: str

    def judge(self, premise: str, hypothesis: str) -> Label: ...


@runtime_checkable
class Decomposer(Protocol):
    fingerprint: str

    def decompose(self, prompt: PromptRecord, media_kind: str) -> Sequence[SemanticElement]: ...


@runtime_checkable
class Rewriter(Protocol):
    fingerprint: str

    def rewrite(self, instruction_id: str, payload: Mapping[str, Any]) -> str: ...


@runtime_checkable
class RewardModel(Protocol):
    fingerprint: str

    def score(self, original_prompt: PromptRecord, visual: VisualHandle) -> float: ...


@dataclass(frozen=True)
class BackendSet:
    """Resolved capability objects for one run."""

    generator: Generator
    captioner: Captioner
    prober: Prober
    nli: NliJudge
    decomposer: Decomposer
    rewriter: Rewriter
    reward: RewardModel

    def fingerprints(self) -> dict[str, str]:
        return {name: getattr(self, name).fingerprint for name in CAPABILITIES}
