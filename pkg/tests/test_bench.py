from __future__ import annotations

from fractions import Fraction

import pytest

from promptloop.backends.profile import build_backends, simulated_profile
from promptloop.backends.simulated import SimElementSpec, SimWorld
from promptloop.bench import (
    BenchmarkEntry,
    PoolItem,
    Vote,
    bench_report,
    build_strategy,
    evaluate,
    load_manifest,
    majority_label,
    random_accuracy_sigma,
    synthetic_entries,
    synthetic_world,
    write_manifest,
)
from promptloop.core import PromptRecord
from promptloop.errors import BackendError, EvenVoteCount


def test_majority_label_examples():
    assert majority_label((Vote(True), Vote(True), Vote(False, "r"))) == "aligned"
    assert majority_label((Vote(False, "r"),) * 3) == "misaligned"
    assert majority_label((Vote(True),) * 5) == "aligned"


def test_even_vote_count_rejected():
    with pytest.raises(EvenVoteCount):
        majority_label((Vote(True), Vote(False, "r")))


def test_entry_invariants(small_world):
    aligned = PoolItem(
        visual=small_world.make_visual([True] * 3, seed=0, tag="a"),
        votes=(Vote(True),) * 3,
    )
    misaligned = PoolItem(
        visual=small_world.make_visual([True, False, True], seed=0, tag="b"),
        votes=(Vote(False, "missing"),) * 3,
    )
    prompt = PromptRecord(prompt_id="b", text="t", category="motion")
    BenchmarkEntry(prompt=prompt, pool=(aligned, misaligned))
    with pytest.raises(ValueError):
        BenchmarkEntry(prompt=prompt, pool=(aligned,))  # needs >= 2 items
    with pytest.raises(ValueError):
        BenchmarkEntry(prompt=prompt, pool=(misaligned, misaligned))  # needs a GT item
    with pytest.raises(ValueError):
        BenchmarkEntry(
            prompt=PromptRecord(prompt_id="b", text="t", category="not-a-category"),
            pool=(aligned, misaligned),
        )


def test_synthetic_generator_satisfies_invariants():
    world = synthetic_world(n_elements=5, world_seed=3)
    entries = synthetic_entries(world, 300, seed=9, pool_size=4)
    assert len(entries) == 300
    for entry in entries:
        assert len(entry.pool) == 4
        aligned_items = [
            item for item in entry.pool if majority_label(item.votes) == "aligned"
        ]
        assert len(aligned_items) == 1
        assert all(len(item.votes) == 3 for item in entry.pool)
        bits = world.satisfied_from_uri(aligned_items[0].visual.uri)
        assert all(bits)


def test_oracle_strategy_is_perfect():
    world = synthetic_world()
    entries = synthetic_entries(world, 60, seed=1)
    result = evaluate(build_strategy("oracle", world=world), entries)
    assert result.overall_accuracy == 1.0
    assert not result.failed_entries


def test_random_strategy_near_uniform():
    world = synthetic_world()
    entries = synthetic_entries(world, 600, seed=2, pool_size=4)
    result = evaluate(build_strategy("random", seed=5), entries)
    sigma = random_accuracy_sigma(4, 600)
    assert abs(result.overall_accuracy - 0.25) < 3 * sigma


def test_efc_strategy_wins_on_clean_world():
    world = synthetic_world()
    backends = build_backends(simulated_profile(world))
    entries = synthetic_entries(world, 40, seed=3)
    result = evaluate(build_strategy("efc", backends=backends), entries,
                      reward_backend=backends.reward)
    assert result.overall_accuracy == 1.0


def test_category_accuracies_average_exactly_to_overall():
    world = synthetic_world()
    entries = synthetic_entries(world, 97, seed=4)
    result = evaluate(build_strategy("random", seed=7), entries)
    total = Fraction(0)
    for hits, evaluated in result.per_category.values():
        total += Fraction(hits)
    assert total == Fraction(result.hits)
    weighted = sum(
        Fraction(hits, evaluated) * Fraction(evaluated, result.evaluated)
        for hits, evaluated in result.per_category.values()
        if evaluated
    )
    assert weighted == result.exact_overall()


def test_binary_vqa_false_alignment_grows_with_bias():
    rates = []
    for bias in (0.0, 0.3, 0.6):
        world = SimWorld(
            world_seed=8,
            media_kind="video",
            vqa_yes_bias=bias,
            elements=tuple(
                SimElementSpec(i, f"video fact {i}", semantic_category="object_motion")
                for i in range(4)
            ),
        )
        backends = build_backends(simulated_profile(world))
        strategy = build_strategy("decomposed_binary_vqa", backends=backends)
        prompt = PromptRecord(prompt_id="b", text=world.base_prompt_text(), category="motion")
        false_aligned = total_unsat = 0
        for index in range(120):
            bits = [(index >> bit) % 2 == 0 for bit in range(4)]
            if all(bits):
                continue
            pool = (
                PoolItem(world.make_visual([True] * 4, seed=0, tag=f"g{index}"), (Vote(True),) * 3),
                PoolItem(world.make_visual(bits, seed=0, tag=f"d{index}"), (Vote(False, "m"),) * 3),
            )
            keys = strategy.score_pool(prompt, pool)
            # count per-element false yes on the distractor
            hits = keys[1][0] * 2 + keys[1][1] * 2  # core and extra fractions over 2 each
            truth = sum(bits)
            false_aligned += float(hits) - truth if float(hits) > truth else 0
            total_unsat += 4 - truth
        rates.append(false_aligned / total_unsat)
    assert rates[0] == 0.0
    assert rates[0] < rates[1] < rates[2]


def test_binary_vqa_matches_efc_without_bias():
    world = synthetic_world()
    backends = build_backends(simulated_profile(world))
    entries = synthetic_entries(world, 30, seed=6)
    efc = evaluate(build_strategy("efc", backends=backends), entries,
                   reward_backend=backends.reward)
    binary = evaluate(build_strategy("decomposed_binary_vqa", backends=backends), entries,
                      reward_backend=backends.reward)
    assert efc.overall_accuracy == binary.overall_accuracy == 1.0


def test_failed_entries_excluded_but_reported():
    world = synthetic_world()
    entries = synthetic_entries(world, 10, seed=8)

    class FlakyStrategy:
        kind = "flaky"
        uses_reward_tiebreak = False

        def __init__(self):
            self.count = 0

        def score_pool(self, prompt, pool):
            self.count += 1
            if self.count % 3 == 0:
                raise BackendError("synthetic outage", capability="reward")
            return [(float(index == 0),) for index in range(len(pool))]

    result = evaluate(FlakyStrategy(), entries)
    assert len(result.failed_entries) == 3
    assert result.evaluated == 7
    assert all(t["failed"] for t in result.traces if t["prompt_id"] in result.failed_entries)


def test_scalar_ties_break_by_item_order_and_are_recorded():
    world = synthetic_world()
    entries = synthetic_entries(world, 5, seed=9)

    class ConstantStrategy:
        kind = "constant"
        uses_reward_tiebreak = False

        def score_pool(self, prompt, pool):
            return [(1.0,) for _ in pool]

    result = evaluate(ConstantStrategy(), entries)
    for trace in result.traces:
        assert trace["tie_break"] == "order"
        assert trace["chosen_index"] == 0


def test_manifest_roundtrip(tmp_path):
    world = synthetic_world()
    entries = synthetic_entries(world, 12, seed=10)
    path = tmp_path / "manifest.jsonl"
    write_manifest(entries, path)
    assert load_manifest(path) == entries


def test_bench_report_contains_reference_rows(tmp_path):
    world = synthetic_world()
    entries = synthetic_entries(world, 20, seed=11)
    result = evaluate(build_strategy("oracle", world=world), entries)
    summary_path, report_path = bench_report(result, tmp_path)
    text = report_path.read_text()
    assert "oracle (measured)" in text
    assert "videoalign (reference)" in text
    assert "0.763" in text  # reference row for the element-level strategy
    assert summary_path.exists()


def test_binary_strategy_single_element_scores():
    world = synthetic_world(n_elements=1, world_seed=5)
    backends = build_backends(simulated_profile(world))
    strategy = build_strategy("decomposed_binary_vqa", backends=backends, media_kind="video")
    prompt = PromptRecord(prompt_id="b", text=world.base_prompt_text(), category="motion")
    pool = (
        PoolItem(world.make_visual([True], seed=0, tag="y"), (Vote(True),) * 3),
        PoolItem(world.make_visual([False], seed=0, tag="n"), (Vote(False, "m"),) * 3),
    )
    keys = strategy.score_pool(prompt, pool)
    assert [float(k[0]) for k in keys] == [1.0, 0.0]
