"""Human- and machine-readable reports derived purely from run event logs.

Rendering never touches a backend and never reads anything but the event
log, so regenerating a report from the same log is byte-identical. Wall
clock lives in the timings sidecar and deliberately stays out of both
outputs (it cannot replay). The hash chain is verified on read; a broken
chain raises CorruptLog.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import records
from .core import Label, Stage
from .orchestrator import ledger_from_events
from .runlog import RunDir, events_of_type


@dataclass(frozen=True)
class RunReport:
    summary: dict
    element_matrix: list[dict]
    diagnosis_history: list[dict]
    ledger_table: dict

    def to_payload(self) -> dict:
        return {
            "record": "run_report",
            "v": 1,
            "summary": self.summary,
            "element_matrix": self.element_matrix,
            "diagnosis_history": self.diagnosis_history,
            "ledger": self.ledger_table,
        }


def build_report(entries: list[dict]) -> RunReport:
    started = next(events_of_type(entries, "run_started"))
    config = started["config"]
    prompt = started["prompt"]
    decomposition = next(events_of_type(entries, "decomposition"))["decomposition"]
    elements = decomposition["elements"]

    candidates = {
        payload["candidate"]["candidate_id"]: payload["candidate"]
        for payload in events_of_type(entries, "candidate_generated")
    }
    verdicts: dict[str, dict] = {}
    scores: dict[str, dict] = {}
    for payload in events_of_type(entries, "candidate_verified"):
        verdicts[payload["candidate_id"]] = payload["report"]
        scores[payload["candidate_id"]] = payload["score"]
    rewards = {
        payload["candidate_id"]: payload["scalar_reward"]
        for payload in events_of_type(entries, "candidate_scored")
    }
    reward_prompts = {
        payload["scored_prompt_id"] for payload in events_of_type(entries, "candidate_scored")
    }

    lineage: list[dict] = [prompt]
    seen_prompts = {prompt["prompt_id"]}
    for payload in events_of_type(entries, "prompt_expanded"):
        if payload["prompt"]["prompt_id"] not in seen_prompts:
            lineage.append(payload["prompt"])
            seen_prompts.add(payload["prompt"]["prompt_id"])
    for payload in events_of_type(entries, "revision"):
        for variant in payload["variants"]:
            if variant["prompt_id"] not in seen_prompts:
                lineage.append(variant)
                seen_prompts.add(variant["prompt_id"])

    matrix: list[dict] = []
    for candidate_id in sorted(candidates):
        report = verdicts.get(candidate_id)
        row = {
            "candidate_id": candidate_id,
            "prompt_id": candidates[candidate_id]["prompt_id"],
            "seed": candidates[candidate_id]["seed"],
            "verdicts": None
            if report is None
            else {str(eid): _cell(verdict) for eid, verdict in report["per_element"]},
            "score": scores.get(candidate_id),
            "scalar_reward": rewards.get(candidate_id),
        }
        matrix.append(row)

    diagnosis_history = []
    selections = {p["iteration"]: p["selection"] for p in events_of_type(entries, "selection")}
    revisions = {p["iteration"]: p for p in events_of_type(entries, "revision")}
    plans = {p["iteration"]: p["plan"] for p in events_of_type(entries, "regeneration_plan")}
    for payload in events_of_type(entries, "diagnosis"):
        iteration = payload["iteration"]
        diagnosis_history.append(
            {
                "iteration": iteration,
                "selection": selections.get(iteration),
                "diagnosis": payload["diagnosis"],
                "revision_mode": revisions.get(iteration, {}).get("mode"),
                "variants": [
                    v["prompt_id"] for v in revisions.get(iteration, {}).get("variants", [])
                ],
                "plan": plans.get(iteration),
            }
        )

    finished = next(events_of_type(entries, "run_finished"))
    final = next(events_of_type(entries, "final_selection"))
    questions = {e["element_id"]: e["probe_question"] for e in elements}
    best_report = verdicts.get(final["candidate_id"])
    probe_trail = []
    if best_report is not None:
        for eid, verdict in best_report["per_element"]:
            if verdict["stage"] == Stage.PROBE_NLI.value:
                probe_trail.append(
                    {
                        "element_id": eid,
                        "question": questions.get(eid),
                        "answer": verdict["evidence"],
                        "label": verdict["label"],
                        "coerced": verdict.get("coerced", False),
                    }
                )
    config_obj = records.from_record(config)
    ledger_table = {
        "nfe_used": finished["ledger"]["nfe_used"],
        "nfe_budget": finished["ledger"]["nfe_budget"],
        "nfe_recomputed_from_log": ledger_from_events(entries, config_obj),
        "calls_by_backend": finished["ledger"]["calls_by_backend"],
        "candidates_completed": finished["completed"],
        "candidates_failed": finished["failed"],
    }

    summary = {
        "prompt": prompt,
        "config": config,
        "elements": elements,
        "best_candidate_id": final["candidate_id"],
        "best_score": final["score"],
        "best_scalar_reward": final["scalar_reward"],
        "best_prompt_id": candidates.get(final["candidate_id"], {}).get("prompt_id"),
        "best_probe_trail": probe_trail,
        "prompt_lineage": lineage,
        "reward_scored_against": sorted(reward_prompts),
        "warnings": [p for p in events_of_type(entries, "revision_warning")],
    }
    return RunReport(
        summary=summary,
        element_matrix=matrix,
        diagnosis_history=diagnosis_history,
        ledger_table=ledger_table,
    )


def _cell(verdict: dict) -> str:
    mark = "+" if verdict["label"] == Label.ENTAILMENT.value else "-"
    if verdict["stage"] == Stage.PROBE_NLI.value:
        mark += "p"
    if verdict.get("coerced"):
        mark += "!"
    return mark


def render(run_dir: str | Path) -> tuple[Path, Path]:
    """Write summary.json and report.md for a finished run."""
    rd = RunDir(run_dir)
    entries = rd.events()
    report = build_report(entries)
    rd.summary_path.write_text(
        records.canonical_json(report.to_payload()) + "\n", encoding="utf-8"
    )
    rd.report_path.write_text(_markdown(report), encoding="utf-8")
    return rd.summary_path, rd.report_path


def _markdown(report: RunReport) -> str:
    s = report.summary
    config = s["config"]
    lines: list[str] = []
    push = lines.append
    push(f"# Run report: {s['prompt']['prompt_id']}")
    push("")
    push(f"Prompt: {s['prompt']['text']}")
    push("")
    push("## Configuration")
    push("")
    push("| field | value |")
    push("| --- | --- |")
    for key in (
        "mode", "total_samples", "first_phase", "top_k",
        "denoising_steps", "cfg_enabled", "iterations", "run_seed",
    ):
        push(f"| {key} | {config[key]} |")
    push("")
    push("## Outcome")
    push("")
    best_score = s["best_score"]
    push(
        f"Best candidate **{s['best_candidate_id']}** "
        f"(conditioned on `{s['best_prompt_id']}`): "
        f"core {best_score['core_hits']}/{best_score['core_total']}, "
        f"extra {best_score['extra_hits']}/{best_score['extra_total']}, "
        f"reward {s['best_scalar_reward']}."
    )
    push("")
    if s["best_probe_trail"]:
        push("Elements the caption left undecided were probed:")
        push("")
        for item in s["best_probe_trail"]:
            coerced = ", coerced" if item["coerced"] else ""
            push(
                f"- e{item['element_id']}: \"{item['question']}\" -> "
                f"\"{item['answer']}\" ({item['label']}{coerced})"
            )
        push("")
    push("## Prompt lineage")
    push("")
    for prompt in s["prompt_lineage"]:
        provenance = prompt["provenance"]
        origin = provenance["kind"]
        if provenance["parent_id"]:
            origin += f" of {provenance['parent_id']}"
        push(f"- `{prompt['prompt_id']}` ({origin}): {prompt['text']}")
    push("")
    push(f"Reward model scored against: {', '.join(s['reward_scored_against'])}.")
    push("")
    push("## Element matrix")
    push("")
    element_ids = [str(e["element_id"]) for e in s["elements"]]
    push("| candidate | prompt | " + " | ".join(f"e{eid}" for eid in element_ids) + " |")
    push("| --- | --- | " + " | ".join("---" for _ in element_ids) + " |")
    for row in report.element_matrix:
        cells = (
            ["(failed)"] * len(element_ids)
            if row["verdicts"] is None
            else [row["verdicts"].get(eid, "?") for eid in element_ids]
        )
        push(f"| {row['candidate_id']} | {row['prompt_id']} | " + " | ".join(cells) + " |")
    push("")
    push("`+` entailed, `-` contradicted, `p` resolved by probing, `!` coerced.")
    push("")
    push("## Diagnosis history")
    push("")
    if not report.diagnosis_history:
        push("No diagnosis: fixed-prompt baseline run.")
    for item in report.diagnosis_history:
        push(f"### Iteration {item['iteration']}")
        push("")
        selection = item["selection"]
        push(
            f"1. Selected top-{len(selection['chosen'])} by joint coverage "
            f"({len(selection['covered_elements'])} elements, method {selection['method']}): "
            + ", ".join(selection["chosen"])
        )
        diagnosis = item["diagnosis"]
        successes = ", ".join(
            f"e{eid}: {hits}/{k}" for eid, (hits, k) in sorted(
                (int(key), tuple(value)) for key, value in diagnosis["per_element_success"].items()
            )
        )
        push(f"2. Per-element success among chosen: {successes}")
        if diagnosis["common_failures"]:
            failed = ", ".join(f"e{eid}" for eid in diagnosis["common_failures"])
            push(f"3. Common failures (below threshold): {failed}; revision mode `{item['revision_mode']}`")
        else:
            push(f"3. No common failures; revision mode `{item['revision_mode']}`")
        plan = item["plan"]
        push(
            f"4. Regenerated {len(plan['jobs'])} samples over {plan['variant_count']} variant(s)"
            + (" [degraded round-robin]" if plan["degraded"] else "")
            + ": " + ", ".join(item["variants"])
        )
        push("")
    push("## Budget ledger")
    push("")
    ledger = report.ledger_table
    push("| field | value |")
    push("| --- | --- |")
    push(f"| NFE used | {ledger['nfe_used']} |")
    push(f"| NFE budget | {ledger['nfe_budget']} |")
    push(f"| NFE recomputed from log | {ledger['nfe_recomputed_from_log']} |")
    push(f"| candidates completed | {ledger['candidates_completed']} |")
    push(f"| candidates failed | {ledger['candidates_failed']} |")
    for kind, count in sorted(ledger["calls_by_backend"].items()):
        push(f"| {kind} calls | {count} |")
    push("")
    push("Wall-clock timings live in `timings.json` (not replay-checked).")
    push("")
    return "\n".join(lines)
