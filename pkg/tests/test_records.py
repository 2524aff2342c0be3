from __future__ import annotations

import pytest

from promptloop import records
from promptloop.backends.simulated import SimWorld
from promptloop.bench import BenchmarkEntry, PoolItem, Vote
from promptloop.config import BudgetLedger, RegenerationPlan, make_run_config
from promptloop.core import (
    AlignmentScore,
    Candidate,
    Importance,
    Label,
    PromptRecord,
    Provenance,
    SemanticCategory,
    SemanticElement,
    Stage,
    Verdict,
    VisualHandle,
)
from promptloop.selection import FailureDiagnosis, TopKSelection
from promptloop.verifier import DecompositionResult

from conftest import make_elements, make_report


def roundtrip(obj):
    line = records.encode_line(obj)
    back = records.decode_line(line)
    assert back == obj
    # canonical form is stable: re-encoding is byte-identical
    assert records.encode_line(back) == line
    return line


def test_roundtrip_prompt():
    roundtrip(PromptRecord(prompt_id="p0", text="a shoe", category="negation"))
    roundtrip(
        PromptRecord(
            prompt_id="p0/r1v0",
            text="a shoe, revised",
            provenance=Provenance(kind="revised", iteration=1, parent_id="p0"),
        )
    )


def test_roundtrip_element_and_verdict():
    roundtrip(
        SemanticElement(
            element_id=0,
            text="a shoe is present",
            importance=Importance.CORE,
            semantic_category=SemanticCategory.OBJECT_PRESENCE,
            probe_question="what object is shown?",
        )
    )
    roundtrip(Verdict(Label.CONTRADICTION, Stage.PROBE_NLI, "no shoe", confidence=0.5, coerced=True))


def test_roundtrip_report_score_candidate():
    report = make_report("eke")
    roundtrip(report)
    roundtrip(AlignmentScore(1, 2, 0, 1))
    candidate = Candidate(
        candidate_id="c1",
        prompt_id="p0",
        seed=123456789,
        visual=VisualHandle(media_kind="video", frame_count=81, uri="store://a.mp4"),
    ).with_report(report, make_elements("ccx")).with_reward(0.875)
    roundtrip(candidate)


def test_roundtrip_config_plan_ledger():
    roundtrip(make_run_config("pris", 20, run_seed=9, profile_fingerprint="abc"))
    roundtrip(RegenerationPlan(jobs=((0, 11), (1, 22)), variant_count=2, degraded=False))
    ledger = BudgetLedger(nfe_budget=2000, nfe_used=500, calls_by_backend={"nli": 3})
    line = records.encode_line(ledger)
    back = records.decode_line(line)
    assert back.nfe_used == 500 and back.calls_by_backend == {"nli": 3}


def test_roundtrip_selection_and_diagnosis():
    roundtrip(
        TopKSelection(
            chosen=("c1", "c3"),
            covered_elements=frozenset({0, 2}),
            tie_broken=True,
            method="exhaustive",
        )
    )
    roundtrip(
        FailureDiagnosis(
            common_failures=(1,),
            per_element_success={0: (2, 2), 1: (0, 2)},
            exploration_mode=False,
        )
    )


def test_roundtrip_decomposition_and_bench_entry(small_world: SimWorld):
    decomposition = DecompositionResult(
        prompt_id="p0",
        elements=tuple(make_elements("ccx")),
        decomposer_fingerprint="fp",
    )
    roundtrip(decomposition)
    entry = BenchmarkEntry(
        prompt=PromptRecord(prompt_id="b0", text="x", category="motion"),
        pool=(
            PoolItem(
                visual=small_world.make_visual([True, True, True], seed=0, tag="a"),
                votes=(Vote(True), Vote(True), Vote(False, "missing: sphere")),
            ),
            PoolItem(
                visual=small_world.make_visual([True, False, True], seed=0, tag="b"),
                votes=(Vote(False, "missing"), Vote(False, "missing"), Vote(True)),
            ),
        ),
    )
    roundtrip(entry)


def test_encoding_is_single_line_sorted_compact():
    line = records.encode_line(PromptRecord(prompt_id="p", text="t"))
    assert "\n" not in line
    assert ": " not in line and ", " not in line
    keys = list(__import__("json").loads(line))
    assert keys == sorted(keys)


def test_unknown_record_passthrough_and_bare_dict_guard():
    assert records.from_record({"record": "mystery", "x": 1}) == {"record": "mystery", "x": 1}
    with pytest.raises(ValueError):
        records.to_record({"no_tag": True})


def test_write_read_lines(tmp_path):
    path = tmp_path / "records.jsonl"
    objs = [PromptRecord(prompt_id=f"p{i}", text=f"t{i}") for i in range(3)]
    records.write_lines(path, objs)
    assert records.read_lines(path) == objs
