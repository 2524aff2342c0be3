"""Domain types shared by all modules, plus candidate scoring and ranking.

All types here are immutable after construction and safe to share across
concurrent tasks. Scores compare as exact rationals so rankings never depend
on platform rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DanglingElement, MissingElement, NeutralFinalLabel

MAX_SEED = (1 << 64) - 1

# Auxiliaries that open a closed (yes/no) question; probe questions must not
# start with one of these.
CLOSED_QUESTION_PREFIXES = frozenset(
    {
        "is", "are", "was", "were", "do", "does", "did",
        "can", "could", "will", "would", "has", "have", "had",
    }
)


def is_open_ended(question: str) -> bool:
    """True when the question does not open with a closed-question auxiliary."""
    words = question.strip().lower().split()
    return bool(words) and words[0].rstrip("?,.") not in CLOSED_QUESTION_PREFIXES


class Importance(str, Enum):
    CORE = "core"
    EXTRA = "extra"


class SemanticCategory(str, Enum):
    OBJECT_PRESENCE = "object_presence"
    PROPERTY = "property"
    SPATIAL = "spatial"
    OBJECT_MOTION = "object_motion"
    CAMERA = "camera"
    TRANSITION = "transition"
    TEMPORAL_ORDER = "temporal_order"
    OTHER = "other"


MOTION_CATEGORIES = frozenset(
    {
        SemanticCategory.OBJECT_MOTION,
        SemanticCategory.CAMERA,
        SemanticCategory.TRANSITION,
        SemanticCategory.TEMPORAL_ORDER,
    }
)


class Label(str, Enum):
    ENTAILMENT = "entailment"
    NEUTRAL = "neutral"
    CONTRADICTION = "contradiction"


class Stage(str, Enum):
    CAPTION_NLI = "caption_nli"
    PROBE_NLI = "probe_nli"


class Ordering(str, Enum):
    A_WINS = "a_wins"
    B_WINS = "b_wins"
    TIE = "tie"


@dataclass(frozen=True)
class Provenance:
    """How a prompt record came to exist."""

    kind: str  # "user" | "expanded" | "revised"
    iteration: int | None = None
    parent_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("user", "expanded", "revised"):
            raise ValueError(f"unknown provenance kind: {self.kind!r}")
        if self.kind == "revised" and not self.parent_id:
            raise ValueError("revised prompts must reference an existing parent")
        if self.kind != "user" and self.parent_id is None:
            raise ValueError(f"{self.kind} prompts must reference a parent")


USER = Provenance(kind="user")


@dataclass(frozen=True)
class PromptRecord:
    prompt_id: str
    text: str
    category: str | None = None
    provenance: Provenance = USER

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("prompt text must be nonempty")
        if self.provenance.parent_id == self.prompt_id:
            raise ValueError("prompt cannot be its own parent")


@dataclass(frozen=True)
class SemanticElement:
    """One atomic, verifiable claim extracted from a prompt."""

    element_id: int
    text: str
    importance: Importance
    semantic_category: SemanticCategory = SemanticCategory.OTHER
    probe_question: str | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("element text must be nonempty")
        if self.probe_question is not None and not is_open_ended(self.probe_question):
            raise ValueError(f"probe question is not open-ended: {self.probe_question!r}")


def check_contiguous(elements: Sequence[SemanticElement]) -> None:
    """Element ids within a prompt must run 0..n-1."""
    ids = [e.element_id for e in elements]
    if ids != list(range(len(elements))):
        raise ValueError(f"element ids must be contiguous from 0, got {ids}")


@dataclass(frozen=True)
class Verdict:
    label: Label
    stage: Stage
    evidence: str
    confidence: float | None = None
    coerced: bool = False

    def __post_init__(self) -> None:
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


@dataclass(frozen=True)
class VerificationReport:
    """Final per-element verdicts for one candidate."""

    candidate_id: str
    per_element: tuple[tuple[int, Verdict], ...]
    caption: str

    def __post_init__(self) -> None:
        if not self.caption:
            raise ValueError("caption must be nonempty")

    def verdict_for(self, element_id: int) -> Verdict:
        for eid, verdict in self.per_element:
            if eid == element_id:
                return verdict
        raise MissingElement(f"report {self.candidate_id} has no verdict for element {element_id}")

    def entailed_ids(self) -> frozenset[int]:
        return frozenset(eid for eid, v in self.per_element if v.label is Label.ENTAILMENT)

    def contradicted_ids(self) -> frozenset[int]:
        return frozenset(eid for eid, v in self.per_element if v.label is Label.CONTRADICTION)

    def coerced_count(self) -> int:
        return sum(1 for _, v in self.per_element if v.coerced)


@dataclass(frozen=True, order=False)
class AlignmentScore:
    """Entailment counts split by element importance.

    Ordering is lexicographic on (core accuracy, extra accuracy) with the
    convention 0/0 = 0, compared as exact rationals.
    """

    core_hits: int
    core_total: int
    extra_hits: int
    extra_total: int

    def __post_init__(self) -> None:
        if self.core_total < 1:
            raise ValueError("core_total must be positive")
        if not 0 <= self.core_hits <= self.core_total:
            raise ValueError("core_hits must lie in [0, core_total]")
        if self.extra_total < 0 or not 0 <= self.extra_hits <= max(self.extra_total, 0):
            raise ValueError("extra_hits must lie in [0, extra_total]")

    @property
    def core_accuracy(self) -> Fraction:
        return Fraction(self.core_hits, self.core_total)

    @property
    def extra_accuracy(self) -> Fraction:
        if self.extra_total == 0:
            return Fraction(0)
        return Fraction(self.extra_hits, self.extra_total)

    def as_key(self) -> tuple[Fraction, Fraction]:
        return (self.core_accuracy, self.extra_accuracy)


def compare_scores(a: AlignmentScore, b: AlignmentScore) -> Ordering:
    """Rank two scores: core accuracy first, extra accuracy as tie-break."""
    ka, kb = a.as_key(), b.as_key()
    if ka > kb:
        return Ordering.A_WINS
    if ka < kb:
        return Ordering.B_WINS
    return Ordering.TIE


def score_report(
    report: VerificationReport, elements: Sequence[SemanticElement]
) -> AlignmentScore:
    """Count entailed elements by importance.

    The report must cover exactly the given elements and carry no neutral
    final labels.
    """
    by_id = {e.element_id: e for e in elements}
    seen: set[int] = set()
    core_hits = extra_hits = 0
    for eid, verdict in report.per_element:
        element = by_id.get(eid)
        if element is None:
            raise DanglingElement(f"report covers unknown element {eid}")
        if eid in seen:
            raise DanglingElement(f"report covers element {eid} more than once")
        seen.add(eid)
        if verdict.label is Label.NEUTRAL:
            raise NeutralFinalLabel(f"element {eid} carries a neutral final label")
        if verdict.label is Label.ENTAILMENT:
            if element.importance is Importance.CORE:
                core_hits += 1
            else:
                extra_hits += 1
    missing = set(by_id) - seen
    if missing:
        raise MissingElement(f"report misses elements {sorted(missing)}")
    core_total = sum(1 for e in elements if e.importance is Importance.CORE)
    extra_total = len(elements) - core_total
    return AlignmentScore(
        core_hits=core_hits,
        core_total=core_total,
        extra_hits=extra_hits,
        extra_total=extra_total,
    )


@dataclass(frozen=True)
class VisualHandle:
    """Opaque reference into the artifact store."""

    media_kind: str  # "image" | "video"
    frame_count: int
    uri: str

    def __post_init__(self) -> None:
        if self.media_kind not in ("image", "video"):
            raise ValueError(f"unknown media kind: {self.media_kind!r}")
        if self.frame_count < 1:
            raise ValueError("frame_count must be positive")
        if not self.uri:
            raise ValueError("uri must be nonempty")


@dataclass(frozen=True)
class Candidate:
    """One generated visual with its provenance and assessments."""

    candidate_id: str
    prompt_id: str
    seed: int
    visual: VisualHandle
    report: VerificationReport | None = None
    score: AlignmentScore | None = None
    scalar_reward: float | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.report is not None and self.score is None:
            raise ValueError("a candidate with a report must carry the derived score")

    def with_report(
        self, report: VerificationReport, elements: Sequence[SemanticElement]
    ) -> "Candidate":
        return replace(self, report=report, score=score_report(report, elements))

    def with_reward(self, value: float) -> "Candidate":
        return replace(self, scalar_reward=value)


def best_candidate(candidates: Iterable[Candidate]) -> Candidate:
    """Pick the top candidate: score ordering, then reward, then lowest id."""
    pool = [c for c in candidates if c.score is not None]
    if not pool:
        raise ValueError("no scored candidates to choose from")

    def key(c: Candidate) -> tuple:
        reward = c.scalar_reward if c.scalar_reward is not None else float("-inf")
        return (*c.score.as_key(), reward, _reversed_id(c.candidate_id))

    return max(pool, key=key)


def _reversed_id(candidate_id: str) -> tuple[int, ...]:
    # max() keeps the lexicographically smallest id on full ties.
    return tuple(-ord(ch) for ch in candidate_id)
