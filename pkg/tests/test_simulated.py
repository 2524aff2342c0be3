from __future__ import annotations

import pytest

from promptloop.backends.simulated import (
    SimElementSpec,
    SimWorld,
    SimulatedCapabilities,
    strip_emphasis,
)
from promptloop.core import Label, PromptRecord


def one_element_world(base: float, gain: float = 0.0, spread: float = 0.0, **kwargs) -> SimWorld:
    return SimWorld(
        world_seed=3,
        elements=(
            SimElementSpec(0, "a lone shoe", base_prob=base, emphasis_gain=gain,
                           seed_affinity_spread=spread),
        ),
        **kwargs,
    )


def test_base_prob_one_always_satisfied():
    world = one_element_world(1.0)
    sim = SimulatedCapabilities(world)
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    for seed in range(50):
        visual = sim.generate(prompt, seed, 50, True)
        assert world.satisfied_from_uri(visual.uri) == (True,)


def test_emphasis_formula_instantiation():
    world = one_element_world(0.0, gain=0.9)
    plain = world.base_prompt_text()
    emphasized = plain + " Emphasize: a lone shoe."
    assert world.effective_prob(0, 0.0, seed=1) == 0.0
    assert world.effective_prob(0, 1.0, seed=1) == pytest.approx(0.9)
    assert world.emphasis_vector(plain) == (0.0,)
    assert world.emphasis_vector(emphasized) == (1.0,)
    # empirical rate under full emphasis approaches 0.9
    hits = sum(world.draw_satisfaction(emphasized, seed)[0] for seed in range(2000))
    assert abs(hits / 2000 - 0.9) < 0.03


def test_emphasis_budget_splits_evenly():
    world = SimWorld(
        world_seed=1,
        elements=tuple(SimElementSpec(i, f"thing {i}", emphasis_gain=0.5) for i in range(4)),
    )
    text = world.base_prompt_text() + " Emphasize: thing 0; thing 2."
    assert world.emphasis_vector(text) == (0.5, 0.0, 0.5, 0.0)


def test_emphasis_crowding_penalizes_non_targets():
    world = SimWorld(
        world_seed=1,
        emphasis_crowding=0.4,
        elements=tuple(SimElementSpec(i, f"thing {i}", base_prob=0.8, emphasis_gain=0.5) for i in range(4)),
    )
    # two of four emphasized: non-targets scale by 1 - 0.4 * 2/4 = 0.8
    assert world.effective_prob(1, 0.0, seed=0, emphasized_count=2) == pytest.approx(0.8 * 0.8)
    assert world.effective_prob(1, 0.0, seed=0, emphasized_count=0) == pytest.approx(0.8)


def test_generation_deterministic_per_prompt_and_seed():
    world = one_element_world(0.5)
    sim = SimulatedCapabilities(world)
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    a = sim.generate(prompt, 7, 50, True)
    b = sim.generate(prompt, 7, 50, True)
    assert a == b
    revised = PromptRecord(prompt_id="p2", text=prompt.text + " (take 2)")
    c = sim.generate(revised, 7, 50, True)
    assert c.uri != a.uri or world.satisfied_from_uri(c.uri) == world.satisfied_from_uri(a.uri)


def test_seed_affinity_persists_across_prompts():
    world = one_element_world(0.5, spread=1.0)
    assert world.affinity(9, 0) == world.affinity(9, 0)
    qualities = [world.seed_quality(seed) for seed in range(200)]
    assert min(qualities) >= 0.0 and max(qualities) <= 1.0


def test_seed_quality_power_shifts_mass_down():
    flat = one_element_world(0.5, spread=1.0)
    cubed = SimWorld(
        world_seed=3,
        seed_quality_power=3.0,
        elements=flat.elements,
    )
    mean_flat = sum(flat.seed_quality(s) for s in range(500)) / 500
    mean_cubed = sum(cubed.seed_quality(s) for s in range(500)) / 500
    assert mean_cubed < mean_flat


def test_caption_enumerates_satisfied_only(small_world):
    sim = SimulatedCapabilities(small_world)
    visual = small_world.make_visual([True, True, False], seed=0, tag="t")
    caption = sim.caption(visual)
    assert "red cube" in caption and "sphere" in caption
    assert "matte finish" not in caption


def test_caption_omission_forced(small_world):
    world = SimWorld(
        world_seed=small_world.world_seed,
        elements=small_world.elements,
        caption_omission_prob=1.0,
    )
    sim = SimulatedCapabilities(world)
    visual = world.make_visual([True, True, True], seed=0, tag="t")
    assert sim.caption(visual) == "The image shows an otherwise empty scene."


def test_nli_oracle_derived_examples(small_world):
    sim = SimulatedCapabilities(small_world)
    assert sim.judge("a red cube sits left of a sphere", "a red cube is present") is Label.ENTAILMENT
    # conflicting attribute on a free-text hypothesis
    assert sim.judge("the scene has no cube at all", "a red cube is present") is Label.CONTRADICTION
    assert sim.judge("a red cube sits on a table", "a dog is present") is Label.NEUTRAL


def test_probe_reads_satisfaction(small_world):
    sim = SimulatedCapabilities(small_world)
    sat = small_world.make_visual([True, False, True], seed=0, tag="t")
    spec = small_world.elements[0]
    assert sim.probe(sat, spec.question(), "probe_open.v1") == "red cube"
    spec1 = small_world.elements[1]
    answer = sim.probe(sat, spec1.question(), "probe_open.v1")
    assert answer.startswith("no ") or answer.startswith("not ")


def test_binary_probe_yes_bias():
    world = one_element_world(0.5, vqa_yes_bias=1.0)
    sim = SimulatedCapabilities(world)
    unsat = world.make_visual([False], seed=0, tag="u")
    assert sim.probe(unsat, "does the visual show a lone shoe?", "probe_binary.v1") == "yes"
    honest = SimulatedCapabilities(one_element_world(0.5, vqa_yes_bias=0.0))
    unsat0 = honest.world.make_visual([False], seed=0, tag="u")
    assert honest.probe(unsat0, "does the visual show a lone shoe?", "probe_binary.v1") == "no"


def test_reward_monotone_and_noise_free_equality(small_world):
    sim = SimulatedCapabilities(small_world)
    prompt = PromptRecord(prompt_id="p", text=small_world.base_prompt_text())
    low = small_world.make_visual([True, False, False], seed=0, tag="a")
    mid = small_world.make_visual([True, True, False], seed=0, tag="b")
    high = small_world.make_visual([True, True, True], seed=0, tag="c")
    assert sim.score(prompt, low) < sim.score(prompt, mid) < sim.score(prompt, high)
    mid2 = small_world.make_visual([False, True, True], seed=1, tag="d")
    assert sim.score(prompt, mid) == sim.score(prompt, mid2) == 2.0


def test_decomposer_identity_on_declared_elements(small_world):
    sim = SimulatedCapabilities(small_world)
    prompt = PromptRecord(prompt_id="p", text=small_world.base_prompt_text())
    elements = sim.decompose(prompt, "image")
    assert [e.text for e in elements] == [spec.text for spec in small_world.elements]
    assert all(e.probe_question for e in elements)


def test_image_world_rejects_motion_elements():
    with pytest.raises(ValueError):
        SimWorld(
            world_seed=1,
            media_kind="image",
            elements=(SimElementSpec(0, "the ball rolls", semantic_category="object_motion"),),
        )
    SimWorld(  # fine for video
        world_seed=1,
        media_kind="video",
        elements=(SimElementSpec(0, "the ball rolls", semantic_category="object_motion"),),
    )


def test_rewriter_modes(small_world):
    sim = SimulatedCapabilities(small_world)
    payload = {
        "parent_text": small_world.base_prompt_text(),
        "elements": [
            {"element_id": spec.element_id, "text": spec.text} for spec in small_world.elements
        ],
        "failure_ids": [1],
        "satisfied_ids": [0, 2],
        "variant_index": 0,
        "attempt": 1,
    }
    targeted = sim.rewrite("rewrite_failure_targeted.v1", payload)
    assert "Emphasize: a sphere sits on the right." in targeted
    second = sim.rewrite("rewrite_failure_targeted.v1", {**payload, "variant_index": 1})
    assert targeted != second
    exploration = sim.rewrite("rewrite_exploration.v1", payload)
    assert small_world.elements[0].text in exploration
    expanded = sim.rewrite("rewrite_standard_expansion.v1", payload)
    assert "Emphasize" not in expanded and expanded != payload["parent_text"]


def test_strip_emphasis_roundtrip(small_world):
    base = small_world.base_prompt_text()
    assert strip_emphasis(base + " Emphasize: a sphere sits on the right. (take 2)") == base
    assert strip_emphasis(f"A rendering of: {base} (variation 2, attempt 1)") == base


def test_visual_uri_guards(small_world):
    other = SimWorld(world_seed=99, elements=small_world.elements)
    visual = small_world.make_visual([True, True, True], seed=1)
    from promptloop.errors import BackendError

    with pytest.raises(BackendError):
        other.satisfied_from_uri(visual.uri)
    with pytest.raises(BackendError):
        small_world.satisfied_from_uri("store://not-simulated.png")


def test_demo_world_decomposes_into_core_claims():
    from promptloop.cli import demo_world

    world = demo_world()
    sim = SimulatedCapabilities(world)
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    elements = sim.decompose(prompt, "image")
    core = [e for e in elements if e.importance.value == "core"]
    assert len(core) >= 2
    assert any("no laces" in e.text for e in core)
