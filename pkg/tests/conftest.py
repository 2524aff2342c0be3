from __future__ import annotations

import pytest

from promptloop.backends.profile import build_backends, simulated_profile
from promptloop.backends.simulated import SimElementSpec, SimWorld

# Acceptance bookkeeping: test_acceptance registers criteria here; passing
# tests mark them; the terminal summary prints one line per criterion.
ACCEPTANCE_CRITERIA: dict[str, bool] = {}


def register_criterion(name: str) -> None:
    ACCEPTANCE_CRITERIA.setdefault(name, False)


def criterion_passed(name: str) -> None:
    ACCEPTANCE_CRITERIA[name] = True


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed in ACCEPTANCE_CRITERIA.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}")
from promptloop.core import (
    Importance,
    Label,
    SemanticCategory,
    SemanticElement,
    Stage,
    Verdict,
    VerificationReport,
)


def make_elements(importances: str) -> list[SemanticElement]:
    """Elements from a compact spec string like 'ccx' (c=core, x=extra)."""
    return [
        SemanticElement(
            element_id=index,
            text=f"element {index}",
            importance=Importance.CORE if mark == "c" else Importance.EXTRA,
            semantic_category=SemanticCategory.OBJECT_PRESENCE,
            probe_question=f"what does the scene show regarding element {index}?",
        )
        for index, mark in enumerate(importances)
    ]


def make_report(labels: str, candidate_id: str = "c0", caption: str = "a scene") -> VerificationReport:
    """Report from a compact label string: e=entailment, k=contradiction."""
    mapping = {"e": Label.ENTAILMENT, "k": Label.CONTRADICTION}
    return VerificationReport(
        candidate_id=candidate_id,
        per_element=tuple(
            (index, Verdict(label=mapping[mark], stage=Stage.CAPTION_NLI, evidence=caption))
            for index, mark in enumerate(labels)
        ),
        caption=caption,
    )


@pytest.fixture
def small_world() -> SimWorld:
    return SimWorld(
        world_seed=5,
        elements=(
            SimElementSpec(0, "a red cube is present", base_prob=0.9,
                           evidence_phrases=("red cube",),
                           conflict_phrases=("no cube", "blue cube")),
            SimElementSpec(1, "a sphere sits on the right", base_prob=0.7,
                           evidence_phrases=("sphere",)),
            SimElementSpec(2, "matte finish", importance="extra",
                           semantic_category="property", base_prob=0.8),
        ),
    )


@pytest.fixture
def small_backends(small_world):
    return build_backends(simulated_profile(small_world))
