from __future__ import annotations

import pytest

from promptloop.backends.base import BackendSet
from promptloop.backends.profile import build_backends, simulated_profile
from promptloop.backends.simulated import SimWorld, SimulatedCapabilities
from promptloop.core import Label, PromptRecord, Stage, VisualHandle
from promptloop.errors import DegenerateAnswer, EmptyDecomposition
from promptloop.verifier import DecompositionResult, NliQuery, Verifier, probe_audit

from conftest import make_elements


class CountingProxy:
    def __init__(self, inner):
        self.inner = inner
        self.calls: dict[str, int] = {}

    def __getattr__(self, name):
        attr = getattr(self.inner, name)
        if callable(attr):
            def wrapped(*args, **kwargs):
                self.calls[name] = self.calls.get(name, 0) + 1
                return attr(*args, **kwargs)
            return wrapped
        return attr


def counting_backends(world: SimWorld) -> tuple[BackendSet, CountingProxy]:
    sim = SimulatedCapabilities(world)
    proxy = CountingProxy(sim)
    return BackendSet(**{name: proxy for name in
                         ("generator", "captioner", "prober", "nli",
                          "decomposer", "rewriter", "reward")}), proxy


def test_decomposition_cached_by_prompt_and_fingerprint(small_world):
    backends, proxy = counting_backends(small_world)
    verifier = Verifier(backends)
    prompt = PromptRecord(prompt_id="p", text=small_world.base_prompt_text())
    first = verifier.decompose(prompt, "image")
    second = verifier.decompose(prompt, "image")
    assert first is second
    assert proxy.calls["decompose"] == 1
    other = PromptRecord(prompt_id="q", text=small_world.base_prompt_text())
    verifier.decompose(other, "image")
    assert proxy.calls["decompose"] == 2


def test_caption_cached_per_visual(small_world):
    backends, proxy = counting_backends(small_world)
    verifier = Verifier(backends)
    visual = small_world.make_visual([True, True, True], seed=0, tag="t")
    verifier.caption(visual)
    verifier.caption(visual)
    assert proxy.calls["caption"] == 1


def test_verify_short_circuits_when_caption_entails_all(small_world):
    backends, proxy = counting_backends(small_world)
    verifier = Verifier(backends)
    prompt = PromptRecord(prompt_id="p", text=small_world.base_prompt_text())
    decomposition = verifier.decompose(prompt, "image")
    visual = small_world.make_visual([True, True, True], seed=0, tag="t")
    report = verifier.verify(decomposition, visual, candidate_id="c0")
    assert all(v.label is Label.ENTAILMENT for _, v in report.per_element)
    assert all(v.stage is Stage.CAPTION_NLI for _, v in report.per_element)
    assert proxy.calls.get("probe", 0) == 0


def omission_world(small_world: SimWorld) -> SimWorld:
    return SimWorld(
        world_seed=small_world.world_seed,
        elements=small_world.elements,
        caption_omission_prob=1.0,
    )


def test_omitted_but_satisfied_recovers_via_probe(small_world):
    world = omission_world(small_world)
    backends, proxy = counting_backends(world)
    verifier = Verifier(backends)
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    decomposition = verifier.decompose(prompt, "image")
    visual = world.make_visual([True, True, True], seed=0, tag="t")
    report = verifier.verify(decomposition, visual, candidate_id="c0")
    assert all(v.label is Label.ENTAILMENT for _, v in report.per_element)
    assert all(v.stage is Stage.PROBE_NLI for _, v in report.per_element)
    assert proxy.calls["probe"] == 3
    assert report.coerced_count() == 0


def test_omitted_and_unsatisfied_becomes_contradiction(small_world):
    world = omission_world(small_world)
    backends, _ = counting_backends(world)
    verifier = Verifier(backends)
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    decomposition = verifier.decompose(prompt, "image")
    visual = world.make_visual([True, False, True], seed=0, tag="t")
    report = verifier.verify(decomposition, visual, candidate_id="c0")
    verdict = report.verdict_for(1)
    assert verdict.label is Label.CONTRADICTION
    assert verdict.stage is Stage.PROBE_NLI
    assert not verdict.coerced  # the probe answer decided, not coercion


def test_probes_only_for_caption_neutral(small_world):
    # omission off: satisfied elements entail at stage 1; unsatisfied are
    # absent from the caption, so exactly those get probed
    backends, proxy = counting_backends(small_world)
    verifier = Verifier(backends)
    prompt = PromptRecord(prompt_id="p", text=small_world.base_prompt_text())
    decomposition = verifier.decompose(prompt, "image")
    visual = small_world.make_visual([True, False, True], seed=0, tag="t")
    report = verifier.verify(decomposition, visual, candidate_id="c0")
    probed = [eid for eid, v in report.per_element if v.stage is Stage.PROBE_NLI]
    assert probed == [1]
    assert proxy.calls["probe"] == 1


def test_caption_only_mode_coerces_neutrals(small_world):
    world = omission_world(small_world)
    backends, proxy = counting_backends(world)
    verifier = Verifier(backends, probe_neutrals=False)
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    decomposition = verifier.decompose(prompt, "image")
    visual = world.make_visual([True, True, True], seed=0, tag="t")
    report = verifier.verify(decomposition, visual, candidate_id="c0")
    assert all(v.label is Label.CONTRADICTION for _, v in report.per_element)
    assert all(v.coerced for _, v in report.per_element)
    assert proxy.calls.get("probe", 0) == 0


class StubNeutralBackend:
    """NLI that never decides; prober that answers off-topic."""

    fingerprint = "stub"
    instructions = {"probe_open": "probe_open.v1"}

    def caption(self, visual):
        return "an indistinct scene"

    def judge(self, premise, hypothesis):
        return Label.NEUTRAL

    def probe(self, visual, question, instruction_id):
        return "something unrelated"

    def decompose(self, prompt, media_kind):
        return make_elements("cc")

    def generate(self, *a, **k):
        raise NotImplementedError

    def rewrite(self, *a, **k):
        raise NotImplementedError

    def score(self, *a, **k):
        raise NotImplementedError


def stub_backends(obj) -> BackendSet:
    return BackendSet(**{name: obj for name in
                         ("generator", "captioner", "prober", "nli",
                          "decomposer", "rewriter", "reward")})


def test_second_neutral_coerced_to_contradiction():
    verifier = Verifier(stub_backends(StubNeutralBackend()))
    decomposition = DecompositionResult(
        prompt_id="p", elements=tuple(make_elements("cc")), decomposer_fingerprint="stub"
    )
    visual = VisualHandle(media_kind="image", frame_count=1, uri="stub://x")
    report = verifier.verify(decomposition, visual, candidate_id="c0")
    for _, verdict in report.per_element:
        assert verdict.label is Label.CONTRADICTION
        assert verdict.stage is Stage.PROBE_NLI
        assert verdict.coerced
    assert report.coerced_count() == 2


class YesNoBackend(StubNeutralBackend):
    def __init__(self, give_up: bool):
        self.give_up = give_up
        self.probe_calls = 0

    def probe(self, visual, question, instruction_id):
        self.probe_calls += 1
        if self.probe_calls == 1 or self.give_up:
            return "yes"
        return "a proper description"


def test_bare_yes_no_retries_once_then_errors():
    polite = YesNoBackend(give_up=False)
    verifier = Verifier(stub_backends(polite))
    visual = VisualHandle(media_kind="image", frame_count=1, uri="stub://x")
    answer = verifier.probe(visual, "what is shown?")
    assert answer == "a proper description"
    assert polite.probe_calls == 2

    stubborn = YesNoBackend(give_up=True)
    verifier = Verifier(stub_backends(stubborn))
    with pytest.raises(DegenerateAnswer):
        verifier.probe(visual, "what is shown?")
    assert stubborn.probe_calls == 2


def test_probe_rejects_closed_questions(small_backends):
    verifier = Verifier(small_backends)
    visual = VisualHandle(media_kind="image", frame_count=1, uri="stub://x")
    with pytest.raises(DegenerateAnswer):
        verifier.probe(visual, "is there a dog?")


class EmptyDecomposer(StubNeutralBackend):
    def decompose(self, prompt, media_kind):
        return []


def test_empty_decomposition_surfaces():
    verifier = Verifier(stub_backends(EmptyDecomposer()))
    with pytest.raises(EmptyDecomposition):
        verifier.decompose(PromptRecord(prompt_id="p", text="x"), "image")


def test_decomposition_result_invariants():
    with pytest.raises(ValueError):
        DecompositionResult(prompt_id="p", elements=(), decomposer_fingerprint="f")
    elements = make_elements("cc")
    no_question = [elements[0], elements[1].__class__(
        element_id=1, text="e1", importance=elements[1].importance,
        semantic_category=elements[1].semantic_category, probe_question=None,
    )]
    with pytest.raises(ValueError):
        DecompositionResult(prompt_id="p", elements=tuple(no_question), decomposer_fingerprint="f")


def test_nli_query_validation():
    with pytest.raises(ValueError):
        NliQuery(premise="", hypothesis="x", stage=Stage.CAPTION_NLI)


def test_report_coverage_and_audit(small_world):
    world = omission_world(small_world)
    backends = build_backends(simulated_profile(world))
    verifier = Verifier(backends)
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    decomposition = verifier.decompose(prompt, "image")
    visual = world.make_visual([True, False, True], seed=0, tag="t")
    report = verifier.verify(decomposition, visual, candidate_id="c9")
    assert {eid for eid, _ in report.per_element} == decomposition.element_ids()
    assert report.candidate_id == "c9"
    audit = probe_audit(report, decomposition.elements)
    assert len(audit) == 3
    assert all(entry["question"] for entry in audit)


def test_verify_deterministic(small_world):
    world = SimWorld(
        world_seed=small_world.world_seed,
        elements=small_world.elements,
        caption_omission_prob=0.4,
    )
    backend_a = build_backends(simulated_profile(world))
    backend_b = build_backends(simulated_profile(world))
    prompt = PromptRecord(prompt_id="p", text=world.base_prompt_text())
    visual = world.make_visual([True, True, False], seed=12, tag="t")
    report_a = Verifier(backend_a).verify(Verifier(backend_a).decompose(prompt, "image"), visual)
    report_b = Verifier(backend_b).verify(Verifier(backend_b).decompose(prompt, "image"), visual)
    assert report_a == report_b


class MotionDecomposer(StubNeutralBackend):
    def decompose(self, prompt, media_kind):
        from promptloop.core import Importance, SemanticCategory, SemanticElement

        return [
            SemanticElement(0, "the ball rolls", Importance.CORE,
                            SemanticCategory.OBJECT_MOTION, probe_question="what moves?")
        ]


def test_motion_elements_rejected_for_image_prompts():
    from promptloop.errors import BackendError

    verifier = Verifier(stub_backends(MotionDecomposer()))
    prompt = PromptRecord(prompt_id="p", text="a rolling ball")
    with pytest.raises(BackendError):
        verifier.decompose(prompt, "image")
    assert verifier.decompose(prompt, "video").elements[0].text == "the ball rolls"
