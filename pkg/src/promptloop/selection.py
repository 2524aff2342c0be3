"""Top-k candidate selection by element coverage, and failure diagnosis.

Selection maximizes the number of elements entailed by at least one chosen
candidate; coverage ties resolve by summed reward-model score, then by
candidate-id order, so identical inputs always select identically. Instances
small enough for exact search are solved exhaustively; larger ones fall back
to greedy marginal coverage (which carries the usual (1 - 1/e) guarantee).

Diagnosis flags common failures: elements entailed by strictly fewer than
half of the chosen candidates. When nothing falls below the threshold the
diagnosis switches to exploration mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Iterable, Mapping, Sequence

from . import records
from .core import Candidate, Importance, SemanticElement, VerificationReport
from .errors import MismatchedElementSets, MissingScalarReward, UnverifiedCandidate

EXHAUSTIVE_SUBSET_LIMIT = 10_000


@dataclass(frozen=True)
class TopKSelection:
    chosen: tuple[str, ...]
    covered_elements: frozenset[int]
    tie_broken: bool
    method: str  # "exhaustive" | "greedy"


@dataclass(frozen=True)
class FailureDiagnosis:
    common_failures: tuple[int, ...]
    per_element_success: dict[int, tuple[int, int]]  # element_id -> (hits, k)
    exploration_mode: bool


def _selection_to(s: TopKSelection) -> dict:
    return {
        "chosen": list(s.chosen),
        "covered_elements": sorted(s.covered_elements),
        "tie_broken": s.tie_broken,
        "method": s.method,
    }


def _selection_from(d: dict) -> TopKSelection:
    return TopKSelection(
        chosen=tuple(d["chosen"]),
        covered_elements=frozenset(d["covered_elements"]),
        tie_broken=d["tie_broken"],
        method=d.get("method", "exhaustive"),
    )


def _diagnosis_to(d: FailureDiagnosis) -> dict:
    return {
        "common_failures": list(d.common_failures),
        "per_element_success": {str(k): list(v) for k, v in sorted(d.per_element_success.items())},
        "exploration_mode": d.exploration_mode,
    }


def _diagnosis_from(payload: dict) -> FailureDiagnosis:
    return FailureDiagnosis(
        common_failures=tuple(payload["common_failures"]),
        per_element_success={
            int(k): (v[0], v[1]) for k, v in payload["per_element_success"].items()
        },
        exploration_mode=payload["exploration_mode"],
    )


records.register("top_k_selection", TopKSelection, _selection_to, _selection_from)
records.register("failure_diagnosis", FailureDiagnosis, _diagnosis_to, _diagnosis_from)


def _coverage_sets(
    candidates: Sequence[Candidate], core_only: bool, elements: Sequence[SemanticElement] | None
) -> list[frozenset[int]]:
    sets: list[frozenset[int]] = []
    universe: frozenset[int] | None = None
    core_ids = (
        frozenset(e.element_id for e in elements if e.importance is Importance.CORE)
        if (core_only and elements is not None)
        else None
    )
    for candidate in candidates:
        if candidate.report is None:
            raise UnverifiedCandidate(f"candidate {candidate.candidate_id} has no report")
        ids = frozenset(eid for eid, _ in candidate.report.per_element)
        if universe is None:
            universe = ids
        elif ids != universe:
            raise MismatchedElementSets(
                f"candidate {candidate.candidate_id} was verified against a different element set"
            )
        entailed = candidate.report.entailed_ids()
        sets.append(entailed & core_ids if core_ids is not None else entailed)
    return sets


def select_top_k(
    candidates: Sequence[Candidate],
    k: int,
    *,
    core_only: bool = False,
    elements: Sequence[SemanticElement] | None = None,
    exhaustive_limit: int = EXHAUSTIVE_SUBSET_LIMIT,
) -> TopKSelection:
    """Pick min(k, M) candidates jointly covering the most elements."""
    if k < 1:
        raise ValueError("k must be positive")
    if not candidates:
        raise ValueError("no candidates to select from")
    coverage = _coverage_sets(candidates, core_only, elements)
    size = min(k, len(candidates))
    if comb(len(candidates), size) <= exhaustive_limit:
        return _select_exhaustive(candidates, coverage, size)
    return _select_greedy(candidates, coverage, size)


def _reward_sum(candidates: Sequence[Candidate], subset: Iterable[int]) -> float:
    total = 0.0
    for idx in subset:
        reward = candidates[idx].scalar_reward
        if reward is None:
            raise MissingScalarReward(
                f"coverage tie needs a reward for candidate {candidates[idx].candidate_id}"
            )
        total += reward
    return total


def _select_exhaustive(
    candidates: Sequence[Candidate], coverage: list[frozenset[int]], size: int
) -> TopKSelection:
    best_subsets: list[tuple[int, ...]] = []
    best_covered = -1
    for subset in combinations(range(len(candidates)), size):
        covered = len(frozenset().union(*(coverage[idx] for idx in subset)))
        if covered > best_covered:
            best_covered = covered
            best_subsets = [subset]
        elif covered == best_covered:
            best_subsets.append(subset)

    tie_broken = False
    if len(best_subsets) > 1:
        tie_broken = True
        # rewards first, then candidate-id order; both deterministic
        best_reward = max(_reward_sum(candidates, s) for s in best_subsets)
        best_subsets = [
            s for s in best_subsets if _reward_sum(candidates, s) == best_reward
        ]
        best_subsets.sort(key=lambda s: tuple(candidates[idx].candidate_id for idx in s))

    chosen_idx = best_subsets[0]
    return TopKSelection(
        chosen=tuple(candidates[idx].candidate_id for idx in chosen_idx),
        covered_elements=frozenset().union(*(coverage[idx] for idx in chosen_idx)),
        tie_broken=tie_broken,
        method="exhaustive",
    )


def _select_greedy(
    candidates: Sequence[Candidate], coverage: list[frozenset[int]], size: int
) -> TopKSelection:
    remaining = set(range(len(candidates)))
    covered: frozenset[int] = frozenset()
    picked: list[int] = []
    tie_broken = False
    for _ in range(size):
        best_idx: int | None = None
        best_gain = -1
        gain_tied_with_reward = False
        for idx in sorted(remaining, key=lambda i: candidates[i].candidate_id):
            gain = len(coverage[idx] - covered)
            if gain > best_gain:
                best_idx, best_gain, gain_tied_with_reward = idx, gain, False
            elif gain == best_gain and best_idx is not None:
                # break per-pick ties by reward, then keep earlier (lower id)
                gain_tied_with_reward = True
                current = candidates[best_idx].scalar_reward
                challenger = candidates[idx].scalar_reward
                if current is None or challenger is None:
                    raise MissingScalarReward("greedy coverage tie needs scalar rewards")
                if challenger > current:
                    best_idx = idx
        assert best_idx is not None
        tie_broken = tie_broken or gain_tied_with_reward
        picked.append(best_idx)
        covered = covered | coverage[best_idx]
        remaining.remove(best_idx)
    return TopKSelection(
        chosen=tuple(candidates[idx].candidate_id for idx in picked),
        covered_elements=covered,
        tie_broken=tie_broken,
        method="greedy",
    )


def diagnose(
    selection: TopKSelection,
    reports: Mapping[str, VerificationReport],
    elements: Sequence[SemanticElement],
    threshold: Fraction = Fraction(1, 2),
) -> FailureDiagnosis:
    """Count per-element successes among the chosen candidates.

    An element is a common failure iff hits/k < threshold, strictly: at
    exactly the threshold the element is not failing.
    """
    k = len(selection.chosen)
    if k < 1:
        raise ValueError("selection is empty")
    element_ids = [e.element_id for e in elements]
    per_element: dict[int, tuple[int, int]] = {}
    failures: list[int] = []
    for eid in element_ids:
        hits = 0
        for candidate_id in selection.chosen:
            report = reports.get(candidate_id)
            if report is None:
                raise UnverifiedCandidate(f"no report supplied for chosen candidate {candidate_id}")
            if eid not in {e for e, _ in report.per_element}:
                raise MismatchedElementSets(
                    f"report for {candidate_id} does not cover element {eid}"
                )
            if eid in report.entailed_ids():
                hits += 1
        per_element[eid] = (hits, k)
        if Fraction(hits, k) < threshold:
            failures.append(eid)
    return FailureDiagnosis(
        common_failures=tuple(failures),
        per_element_success=per_element,
        exploration_mode=not failures,
    )
