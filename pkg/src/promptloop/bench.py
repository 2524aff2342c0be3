"""Verifier-accuracy benchmark harness.

Entries pair a prompt with a pool of visuals, each carrying an odd number of
annotator votes; the item-level ground truth is the majority vote. A
strategy scores every pool item; the entry counts as a hit when the
top-scored item's majority label is aligned. Strategy-internal score ties
break by reward-model score (for element-level strategies) and then by item
order, with the tie-break recorded in the trace. Entries whose strategy
errors out are excluded from the accuracy denominator but counted and
reported.

The harness ships the manifest schema, a synthetic benchmark generator over
simulated worlds, and reference accuracy rows for externally measured
verifiers so reports can render a side-by-side comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import records, rng
from .backends.base import BackendSet
from .backends.simulated import SimElementSpec, SimWorld
from .core import (
    AlignmentScore,
    Importance,
    PromptRecord,
    VisualHandle,
    score_report,
)
from .errors import BackendError, EngineError, EvenVoteCount
from .verifier import Verifier

CATEGORIES = (
    "motion",
    "physics",
    "dynamic_attributes",
    "motion_order",
    "motion_rationality",
    "other",
)

STRATEGY_KINDS = ("scalar_reward", "decomposed_binary_vqa", "efc", "oracle", "random")

# Reference top-1 selection accuracies measured externally on the full
# 410-prompt video benchmark; not desk-reproducible, emitted as comparison
# rows in bench reports.
REFERENCE_ACCURACY: dict[str, dict[str, float]] = {
    "visionreward": {
        "motion": 0.650, "physics": 0.569, "dynamic_attributes": 0.319,
        "motion_rationality": 0.662, "motion_order": 0.452, "overall": 0.571,
    },
    "unifiedreward": {
        "motion": 0.492, "physics": 0.507, "dynamic_attributes": 0.298,
        "motion_rationality": 0.588, "motion_order": 0.581, "overall": 0.498,
    },
    "videoalign": {
        "motion": 0.792, "physics": 0.660, "dynamic_attributes": 0.511,
        "motion_rationality": 0.794, "motion_order": 0.516, "overall": 0.693,
    },
    "decomposed_binary_vqa": {
        "motion": 0.733, "physics": 0.667, "dynamic_attributes": 0.617,
        "motion_rationality": 0.809, "motion_order": 0.613, "overall": 0.700,
    },
    "efc": {
        "motion": 0.792, "physics": 0.764, "dynamic_attributes": 0.638,
        "motion_rationality": 0.838, "motion_order": 0.677, "overall": 0.763,
    },
}


@dataclass(frozen=True)
class Vote:
    aligned: bool
    reason: str | None = None

    def __post_init__(self) -> None:
        if not self.aligned and not self.reason:
            raise ValueError("misaligned votes must carry a reason")


@dataclass(frozen=True)
class PoolItem:
    visual: VisualHandle
    votes: tuple[Vote, ...]


@dataclass(frozen=True)
class BenchmarkEntry:
    prompt: PromptRecord
    pool: tuple[PoolItem, ...]

    def __post_init__(self) -> None:
        if self.prompt.category not in CATEGORIES:
            raise ValueError(f"unknown benchmark category: {self.prompt.category!r}")
        if len(self.pool) < 2:
            raise ValueError("a benchmark entry needs at least two pool items")
        for item in self.pool:
            if len(item.votes) < 3 or len(item.votes) % 2 == 0:
                raise ValueError("each pool item needs an odd number >= 3 of votes")
        if not any(majority_label(item.votes) == "aligned" for item in self.pool):
            raise ValueError("a benchmark entry needs at least one majority-aligned item")


def majority_label(votes: tuple[Vote, ...]) -> str:
    """Strict-majority alignment label for one pool item."""
    if len(votes) % 2 == 0:
        raise EvenVoteCount(f"majority voting needs an odd vote count, got {len(votes)}")
    aligned = sum(1 for vote in votes if vote.aligned)
    return "aligned" if aligned * 2 > len(votes) else "misaligned"


def _entry_to(entry: BenchmarkEntry) -> dict:
    return {
        "prompt": records.to_record(entry.prompt),
        "pool": [
            {
                "visual": records.to_record(item.visual),
                "votes": [{"aligned": v.aligned, "reason": v.reason} for v in item.votes],
            }
            for item in entry.pool
        ],
    }


def _entry_from(payload: dict) -> BenchmarkEntry:
    return BenchmarkEntry(
        prompt=records.from_record(payload["prompt"]),
        pool=tuple(
            PoolItem(
                visual=records.from_record(item["visual"]),
                votes=tuple(Vote(aligned=v["aligned"], reason=v.get("reason")) for v in item["votes"]),
            )
            for item in payload["pool"]
        ),
    )


records.register("bench_entry", BenchmarkEntry, _entry_to, _entry_from)


def write_manifest(entries, path: str | Path) -> None:
    records.write_lines(path, entries)


def load_manifest(path: str | Path) -> list[BenchmarkEntry]:
    entries = records.read_lines(path)
    bad = [e for e in entries if not isinstance(e, BenchmarkEntry)]
    if bad:
        raise EngineError(f"manifest contains {len(bad)} non-entry records")
    return entries


# --- strategies -------------------------------------------------------------


class VerifierStrategy:
    """Scores every pool item of an entry; higher keys are better."""

    kind: str = ""
    uses_reward_tiebreak: bool = False

    def score_pool(self, prompt: PromptRecord, pool: tuple[PoolItem, ...]) -> list[tuple]:
        raise NotImplementedError


class EfcStrategy(VerifierStrategy):
    """Full element-level verification with probing."""

    kind = "efc"
    uses_reward_tiebreak = True

    def __init__(self, backends: BackendSet, media_kind: str = "video"):
        self.backends = backends
        self.verifier = Verifier(backends)
        self.media_kind = media_kind

    def score_pool(self, prompt, pool):
        decomposition = self.verifier.decompose(prompt, self.media_kind)
        keys = []
        for index, item in enumerate(pool):
            report = self.verifier.verify(decomposition, item.visual, candidate_id=f"pool-{index}")
            score = score_report(report, decomposition.elements)
            keys.append(score.as_key())
        return keys


class DecomposedBinaryVqaStrategy(VerifierStrategy):
    """Ablation: closed yes/no question per element, score by yes count."""

    kind = "decomposed_binary_vqa"
    uses_reward_tiebreak = True

    def __init__(self, backends: BackendSet, media_kind: str = "video",
                 instruction_id: str | None = None):
        self.backends = backends
        self.verifier = Verifier(backends)
        self.media_kind = media_kind
        if instruction_id is None:
            bound = getattr(backends.prober, "instructions", None) or {}
            instruction_id = bound.get("probe_binary", "probe_binary.v1")
        self.instruction_id = instruction_id

    def score_pool(self, prompt, pool):
        decomposition = self.verifier.decompose(prompt, self.media_kind)
        keys = []
        for item in pool:
            core_hits = extra_hits = 0
            for element in decomposition.elements:
                question = f"does the visual show {element.text}?"
                answer = self.backends.prober.probe(item.visual, question, self.instruction_id)
                if answer.strip().lower().startswith("yes"):
                    if element.importance is Importance.CORE:
                        core_hits += 1
                    else:
                        extra_hits += 1
            core_total = sum(
                1 for e in decomposition.elements if e.importance is Importance.CORE
            )
            extra_total = len(decomposition.elements) - core_total
            score = AlignmentScore(core_hits, core_total, extra_hits, extra_total)
            keys.append(score.as_key())
        return keys


class ScalarRewardStrategy(VerifierStrategy):
    kind = "scalar_reward"

    def __init__(self, backends: BackendSet):
        self.backends = backends

    def score_pool(self, prompt, pool):
        return [(self.backends.reward.score(prompt, item.visual),) for item in pool]


class OracleStrategy(VerifierStrategy):
    """Reads simulated ground truth; test harness sanity only."""

    kind = "oracle"

    def __init__(self, world: SimWorld):
        self.world = world

    def score_pool(self, prompt, pool):
        return [(self.world.satisfied_count(item.visual.uri),) for item in pool]


class RandomStrategy(VerifierStrategy):
    """Uniform keyed scores; test harness sanity only."""

    kind = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def score_pool(self, prompt, pool):
        return [
            (rng.hash_unit(self.seed, "bench-random", prompt.prompt_id, index),)
            for index in range(len(pool))
        ]


def build_strategy(
    kind: str,
    backends: BackendSet | None = None,
    world: SimWorld | None = None,
    media_kind: str = "video",
    seed: int = 0,
) -> VerifierStrategy:
    if kind == "efc":
        return EfcStrategy(backends, media_kind)
    if kind == "decomposed_binary_vqa":
        return DecomposedBinaryVqaStrategy(backends, media_kind)
    if kind == "scalar_reward":
        return ScalarRewardStrategy(backends)
    if kind == "oracle":
        if world is None:
            raise EngineError("oracle strategy needs a simulated world")
        return OracleStrategy(world)
    if kind == "random":
        return RandomStrategy(seed)
    raise EngineError(f"unknown strategy kind {kind!r}")


# --- evaluation -------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationResult:
    strategy_kind: str
    hits: int
    evaluated: int
    per_category: dict[str, tuple[int, int]]  # category -> (hits, evaluated)
    traces: tuple[dict, ...]
    failed_entries: tuple[str, ...]

    @property
    def overall_accuracy(self) -> float:
        return self.hits / self.evaluated if self.evaluated else 0.0

    def per_category_accuracy(self) -> dict[str, float]:
        return {
            category: (hits / evaluated if evaluated else 0.0)
            for category, (hits, evaluated) in sorted(self.per_category.items())
        }

    def exact_overall(self) -> Fraction:
        return Fraction(self.hits, self.evaluated) if self.evaluated else Fraction(0)


def evaluate(
    strategy: VerifierStrategy,
    entries: list[BenchmarkEntry],
    reward_backend=None,
) -> EvaluationResult:
    hits = 0
    evaluated = 0
    per_category: dict[str, list[int]] = {}
    traces: list[dict] = []
    failed: list[str] = []
    for entry in entries:
        try:
            keys = strategy.score_pool(entry.prompt, entry.pool)
        except BackendError as exc:
            failed.append(entry.prompt.prompt_id)
            traces.append(
                {
                    "prompt_id": entry.prompt.prompt_id,
                    "category": entry.prompt.category,
                    "failed": True,
                    "error": str(exc),
                }
            )
            continue
        top_key = max(keys)
        tied = [index for index, key in enumerate(keys) if key == top_key]
        tie_break = None
        chosen = tied[0]
        if len(tied) > 1:
            if strategy.uses_reward_tiebreak and reward_backend is not None:
                rewards = [
                    reward_backend.score(entry.prompt, entry.pool[index].visual)
                    for index in tied
                ]
                best_reward = max(rewards)
                tied = [index for index, r in zip(tied, rewards) if r == best_reward]
                tie_break = "reward" if len(tied) == 1 else "reward+order"
            else:
                tie_break = "order"
            chosen = tied[0]
        hit = majority_label(entry.pool[chosen].votes) == "aligned"
        evaluated += 1
        hits += int(hit)
        bucket = per_category.setdefault(entry.prompt.category, [0, 0])
        bucket[0] += int(hit)
        bucket[1] += 1
        traces.append(
            {
                "prompt_id": entry.prompt.prompt_id,
                "category": entry.prompt.category,
                "failed": False,
                "chosen_index": chosen,
                "tie_break": tie_break,
                "hit": hit,
                "keys": [str(key) for key in keys],
            }
        )
    return EvaluationResult(
        strategy_kind=strategy.kind,
        hits=hits,
        evaluated=evaluated,
        per_category={k: (v[0], v[1]) for k, v in per_category.items()},
        traces=tuple(traces),
        failed_entries=tuple(failed),
    )


# --- synthetic benchmark ----------------------------------------------------


def synthetic_world(n_elements: int = 4, world_seed: int = 7, media_kind: str = "video") -> SimWorld:
    categories = ("object_presence", "property", "object_motion", "temporal_order")
    elements = tuple(
        SimElementSpec(
            element_id=index,
            text=f"scene fact {index}",
            importance="core" if index % 2 == 0 else "extra",
            semantic_category=categories[index % len(categories)]
            if media_kind == "video"
            else ("object_presence" if index % 2 == 0 else "property"),
        )
        for index in range(n_elements)
    )
    return SimWorld(world_seed=world_seed, elements=elements, media_kind=media_kind)


def synthetic_entries(
    world: SimWorld,
    count: int,
    seed: int = 0,
    pool_size: int = 4,
) -> list[BenchmarkEntry]:
    """Generate entries satisfying every BenchmarkEntry invariant.

    Each pool holds exactly one fully aligned item at a keyed-random position
    and distractors missing at least one element; three truthful annotators
    vote per item.
    """
    if pool_size < 2:
        raise ValueError("pool_size must be at least 2")
    n = len(world.elements)
    entries = []
    for index in range(count):
        prompt = PromptRecord(
            prompt_id=f"bench-{index:05d}",
            text=world.base_prompt_text(),
            category=CATEGORIES[index % 5],
        )
        aligned_position = rng.hash_u64(seed, "bench-gt-pos", index) % pool_size
        items = []
        for position in range(pool_size):
            if position == aligned_position:
                bits = [True] * n
            else:
                bits = [
                    rng.hash_unit(seed, "bench-bit", index, position, eid) < 0.6
                    for eid in range(n)
                ]
                if all(bits):
                    drop = rng.hash_u64(seed, "bench-drop", index, position) % n
                    bits[drop] = False
            visual = world.make_visual(bits, seed=0, tag=f"b{index}x{position}")
            if all(bits):
                votes = tuple(Vote(aligned=True) for _ in range(3))
            else:
                missing = next(
                    world.elements[eid].text for eid in range(n) if not bits[eid]
                )
                votes = tuple(
                    Vote(aligned=False, reason=f"missing: {missing}") for _ in range(3)
                )
            items.append(PoolItem(visual=visual, votes=votes))
        entries.append(BenchmarkEntry(prompt=prompt, pool=tuple(items)))
    return entries


# --- reporting ----------------------------------------------------------------


def bench_report(result: EvaluationResult, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "record": "bench_report",
        "v": 1,
        "strategy": result.strategy_kind,
        "overall_accuracy": result.overall_accuracy,
        "hits": result.hits,
        "evaluated": result.evaluated,
        "failed_entries": list(result.failed_entries),
        "per_category": {
            category: {"hits": hits, "evaluated": evaluated}
            for category, (hits, evaluated) in sorted(result.per_category.items())
        },
        "reference_accuracy": REFERENCE_ACCURACY,
        "traces": list(result.traces),
    }
    summary_path = out / "bench_summary.json"
    summary_path.write_text(records.canonical_json(payload) + "\n", encoding="utf-8")

    lines = [
        f"# Verifier benchmark: strategy `{result.strategy_kind}`",
        "",
        f"Entries evaluated: {result.evaluated} (failed: {len(result.failed_entries)})",
        "",
        "| verifier | " + " | ".join(CATEGORIES[:5]) + " | overall |",
        "| --- | --- | --- | --- | --- | --- | --- |",
    ]
    measured = result.per_category_accuracy()
    row = [f"{measured.get(cat, float('nan')):.3f}" if cat in measured else "-" for cat in CATEGORIES[:5]]
    lines.append(
        f"| {result.strategy_kind} (measured) | " + " | ".join(row) + f" | {result.overall_accuracy:.3f} |"
    )
    for name, accuracy in REFERENCE_ACCURACY.items():
        cells = [f"{accuracy[cat]:.3f}" for cat in CATEGORIES[:5]]
        lines.append(f"| {name} (reference) | " + " | ".join(cells) + f" | {accuracy['overall']:.3f} |")
    lines += [
        "",
        "Reference rows are externally measured published accuracies for",
        "comparison; they are not reproduced by this run.",
        "",
    ]
    report_path = out / "bench_report.md"
    report_path.write_text("\n".join(lines), encoding="utf-8")
    return summary_path, report_path


def random_accuracy_sigma(pool_size: int, n_entries: int) -> float:
    """Std dev of a uniform-random strategy's accuracy estimate."""
    p = 1.0 / pool_size
    return math.sqrt(p * (1 - p) / n_entries)
