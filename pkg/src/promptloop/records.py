"""Canonical versioned record encoding.

One schema serves run logs, the wire protocol, and benchmark manifests:
UTF-8 JSON with sorted keys and compact separators, one record per line.
Every record carries a "record" tag and schema version "v". Modules that
define their own record types register codecs here at import time.
"""

from __future__ import annotations

import json
from typing import Any, Callable

from . import config, core

RECORD_VERSION = 1

_TO: dict[type, tuple[str, Callable[[Any], dict]]] = {}
_FROM: dict[str, Callable[[dict], Any]] = {}


def register(
    name: str,
    cls: type,
    to_payload: Callable[[Any], dict],
    from_payload: Callable[[dict], Any],
) -> None:
    _TO[cls] = (name, to_payload)
    _FROM[name] = from_payload


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def to_record(obj: Any) -> dict:
    if isinstance(obj, dict):
        if "record" not in obj:
            raise ValueError("bare dict records must carry a 'record' tag")
        return obj
    entry = _TO.get(type(obj))
    if entry is None:
        raise TypeError(f"no record codec registered for {type(obj).__name__}")
    name, to_payload = entry
    return {"record": name, "v": RECORD_VERSION, **to_payload(obj)}


def from_record(data: dict) -> Any:
    name = data.get("record")
    if name is None:
        raise ValueError("record without a 'record' tag")
    decode = _FROM.get(name)
    if decode is None:
        _import_registrars()
        decode = _FROM.get(name)
    if decode is None:
        return data  # unknown tags pass through as plain dicts
    return decode(data)


def encode_line(obj: Any) -> str:
    return canonical_json(to_record(obj))


def decode_line(line: str) -> Any:
    return from_record(json.loads(line))


def write_lines(path, objs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(encode_line(obj) + "\n")


def read_lines(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(decode_line(line))
    return out


def _import_registrars() -> None:
    # Sibling modules register their codecs on import; pulled in lazily so
    # decoding works regardless of which entry point loaded first.
    from . import bench, selection, verifier  # noqa: F401


# --- codecs for core and config types -------------------------------------


def _prompt_to(p: core.PromptRecord) -> dict:
    return {
        "prompt_id": p.prompt_id,
        "text": p.text,
        "category": p.category,
        "provenance": {
            "kind": p.provenance.kind,
            "iteration": p.provenance.iteration,
            "parent_id": p.provenance.parent_id,
        },
    }


def _prompt_from(d: dict) -> core.PromptRecord:
    prov = d["provenance"]
    return core.PromptRecord(
        prompt_id=d["prompt_id"],
        text=d["text"],
        category=d.get("category"),
        provenance=core.Provenance(
            kind=prov["kind"],
            iteration=prov.get("iteration"),
            parent_id=prov.get("parent_id"),
        ),
    )


def _element_to(e: core.SemanticElement) -> dict:
    return {
        "element_id": e.element_id,
        "text": e.text,
        "importance": e.importance.value,
        "semantic_category": e.semantic_category.value,
        "probe_question": e.probe_question,
    }


def _element_from(d: dict) -> core.SemanticElement:
    return core.SemanticElement(
        element_id=d["element_id"],
        text=d["text"],
        importance=core.Importance(d["importance"]),
        semantic_category=core.SemanticCategory(d["semantic_category"]),
        probe_question=d.get("probe_question"),
    )


def _verdict_to(v: core.Verdict) -> dict:
    return {
        "label": v.label.value,
        "stage": v.stage.value,
        "evidence": v.evidence,
        "confidence": v.confidence,
        "coerced": v.coerced,
    }


def _verdict_from(d: dict) -> core.Verdict:
    return core.Verdict(
        label=core.Label(d["label"]),
        stage=core.Stage(d["stage"]),
        evidence=d["evidence"],
        confidence=d.get("confidence"),
        coerced=d.get("coerced", False),
    )


def _report_to(r: core.VerificationReport) -> dict:
    return {
        "candidate_id": r.candidate_id,
        "per_element": [[eid, _verdict_to(v)] for eid, v in r.per_element],
        "caption": r.caption,
    }


def _report_from(d: dict) -> core.VerificationReport:
    return core.VerificationReport(
        candidate_id=d["candidate_id"],
        per_element=tuple((eid, _verdict_from(v)) for eid, v in d["per_element"]),
        caption=d["caption"],
    )


def _score_to(s: core.AlignmentScore) -> dict:
    return {
        "core_hits": s.core_hits,
        "core_total": s.core_total,
        "extra_hits": s.extra_hits,
        "extra_total": s.extra_total,
    }


def _score_from(d: dict) -> core.AlignmentScore:
    return core.AlignmentScore(
        core_hits=d["core_hits"],
        core_total=d["core_total"],
        extra_hits=d["extra_hits"],
        extra_total=d["extra_total"],
    )


def _visual_to(v: core.VisualHandle) -> dict:
    return {"media_kind": v.media_kind, "frame_count": v.frame_count, "uri": v.uri}


def _visual_from(d: dict) -> core.VisualHandle:
    return core.VisualHandle(
        media_kind=d["media_kind"], frame_count=d["frame_count"], uri=d["uri"]
    )


def _candidate_to(c: core.Candidate) -> dict:
    return {
        "candidate_id": c.candidate_id,
        "prompt_id": c.prompt_id,
        "seed": c.seed,
        "visual": _visual_to(c.visual),
        "report": None if c.report is None else _report_to(c.report),
        "score": None if c.score is None else _score_to(c.score),
        "scalar_reward": c.scalar_reward,
    }


def _candidate_from(d: dict) -> core.Candidate:
    return core.Candidate(
        candidate_id=d["candidate_id"],
        prompt_id=d["prompt_id"],
        seed=d["seed"],
        visual=_visual_from(d["visual"]),
        report=None if d.get("report") is None else _report_from(d["report"]),
        score=None if d.get("score") is None else _score_from(d["score"]),
        scalar_reward=d.get("scalar_reward"),
    )


def _run_config_to(c: config.RunConfig) -> dict:
    return {
        "mode": c.mode,
        "total_samples": c.total_samples,
        "first_phase": c.first_phase,
        "top_k": c.top_k,
        "denoising_steps": c.denoising_steps,
        "cfg_enabled": c.cfg_enabled,
        "iterations": c.iterations,
        "run_seed": c.run_seed,
        "nfe_budget": c.nfe_budget,
        "media_kind": c.media_kind,
        "expand_first": c.expand_first,
        "accumulate_pool": c.accumulate_pool,
        "core_only_coverage": c.core_only_coverage,
        "failure_threshold": list(c.failure_threshold),
        "profile_fingerprint": c.profile_fingerprint,
    }


def _run_config_from(d: dict) -> config.RunConfig:
    return config.RunConfig(
        mode=d["mode"],
        total_samples=d["total_samples"],
        first_phase=d["first_phase"],
        top_k=d["top_k"],
        denoising_steps=d["denoising_steps"],
        cfg_enabled=d["cfg_enabled"],
        iterations=d["iterations"],
        run_seed=d["run_seed"],
        nfe_budget=d["nfe_budget"],
        media_kind=d.get("media_kind", "image"),
        expand_first=d.get("expand_first", False),
        accumulate_pool=d.get("accumulate_pool", True),
        core_only_coverage=d.get("core_only_coverage", False),
        failure_threshold=tuple(d.get("failure_threshold", (1, 2))),
        profile_fingerprint=d.get("profile_fingerprint", ""),
    )


def _plan_to(p: config.RegenerationPlan) -> dict:
    return {
        "jobs": [[v, s] for v, s in p.jobs],
        "variant_count": p.variant_count,
        "degraded": p.degraded,
    }


def _plan_from(d: dict) -> config.RegenerationPlan:
    return config.RegenerationPlan(
        jobs=tuple((v, s) for v, s in d["jobs"]),
        variant_count=d["variant_count"],
        degraded=d.get("degraded", False),
    )


# Wall-clock durations are deliberately absent from the canonical ledger
# record: they cannot replay byte-identically, so they live in the timings
# sidecar instead of the hash-chained log.
def _ledger_to(ledger: config.BudgetLedger) -> dict:
    return {
        "nfe_budget": ledger.nfe_budget,
        "nfe_used": ledger.nfe_used,
        "calls_by_backend": dict(sorted(ledger.calls_by_backend.items())),
    }


def _ledger_from(d: dict) -> config.BudgetLedger:
    return config.BudgetLedger(
        nfe_budget=d["nfe_budget"],
        nfe_used=d["nfe_used"],
        calls_by_backend=dict(d.get("calls_by_backend", {})),
    )


register("prompt", core.PromptRecord, _prompt_to, _prompt_from)
register("semantic_element", core.SemanticElement, _element_to, _element_from)
register("verdict", core.Verdict, _verdict_to, _verdict_from)
register("verification_report", core.VerificationReport, _report_to, _report_from)
register("alignment_score", core.AlignmentScore, _score_to, _score_from)
register("visual", core.VisualHandle, _visual_to, _visual_from)
register("candidate", core.Candidate, _candidate_to, _candidate_from)
register("run_config", config.RunConfig, _run_config_to, _run_config_from)
register("regeneration_plan", config.RegenerationPlan, _plan_to, _plan_from)
register("budget_ledger", config.BudgetLedger, _ledger_to, _ledger_from)
