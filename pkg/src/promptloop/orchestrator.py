"""Run orchestration: best-of-N and the verify-diagnose-revise-regenerate loop.

A run: generate a first phase of candidates, verify each against one
decomposition of the original prompt, select the top-k by joint element
coverage, diagnose common failures, revise the prompt accordingly (or
paraphrase when nothing commonly fails), and regenerate the remaining budget
with revised variants over the selected candidates' seeds. Iterating repeats
selection through regeneration on the accumulated pool with an even split of
the remaining sample budget.

Two invariants the events make auditable: every scalar reward is computed
against the original user prompt, and every regenerated candidate's seed
comes from the preceding selection. All candidates in one run score against
the same decomposition, which is what makes cross-phase scores comparable.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import records, rng
from .backends.base import BackendSet, CAPABILITIES
from .backends.profile import BackendProfile, build_backends
from .config import BudgetLedger, RegenerationPlan, RunConfig, compute_nfe
from .core import Candidate, PromptRecord, best_candidate
from .errors import BackendError, EmptySelection, EngineError, UnfaithfulRevision
from .redesign import Redesigner, RevisionMode, RevisionRequest
from .runlog import EventLog, RunDir, events_of_type
from .selection import TopKSelection, diagnose, select_top_k
from .verifier import DecompositionResult, Verifier

_COUNTED_METHODS = frozenset(
    {"generate", "caption", "probe", "judge", "decompose", "rewrite", "score"}
)


class _Counted:
    """Delegating wrapper that tallies backend calls into the ledger."""

    def __init__(self, inner, kind: str, ledger: BudgetLedger):
        self._inner = inner
        self._kind = kind
        self._ledger = ledger

    def __getattr__(self, name: str):
        attr = getattr(self._inner, name)
        if name in _COUNTED_METHODS and callable(attr):
            def counted(*args, **kwargs):
                self._ledger.record_call(self._kind)
                return attr(*args, **kwargs)

            return counted
        return attr


def _counted_backends(backends: BackendSet, ledger: BudgetLedger) -> BackendSet:
    return BackendSet(
        **{kind: _Counted(getattr(backends, kind), kind, ledger) for kind in CAPABILITIES}
    )


@dataclass(frozen=True)
class RunResult:
    best: Candidate
    candidates: tuple[Candidate, ...]
    ledger: BudgetLedger
    decomposition: DecompositionResult
    events: tuple[dict, ...]
    run_dir: Path | None
    warnings: tuple[str, ...] = ()


def plan_regeneration(
    config: RunConfig,
    selection: TopKSelection,
    seeds_by_candidate: dict[str, int],
    n_regen: int | None = None,
    per_sample: bool = False,
) -> RegenerationPlan:
    """Lay out (variant x reused-seed) jobs for one regeneration phase.

    When the job count divides by k, every variant pairs with every selected
    seed. Otherwise assignment falls back to round-robin and the plan is
    flagged degraded. Per-sample plans use one variant per selected
    candidate, rotating seeds across rounds so pairs stay distinct.
    """
    if not selection.chosen:
        raise EmptySelection("cannot plan regeneration over an empty selection")
    seeds = [seeds_by_candidate[cid] for cid in selection.chosen]
    k = len(seeds)
    total = config.total_samples - config.first_phase if n_regen is None else n_regen
    if total < 1:
        raise ValueError("regeneration needs at least one sample")
    if per_sample:
        jobs = tuple(
            (t % k, seeds[((t % k) + (t // k)) % k]) for t in range(total)
        )
        return RegenerationPlan(jobs=jobs, variant_count=k, degraded=total % k != 0)
    if total % k == 0:
        variant_count = total // k
        jobs = tuple((v, s) for v in range(variant_count) for s in seeds)
        return RegenerationPlan(jobs=jobs, variant_count=variant_count, degraded=False)
    variant_count = math.ceil(total / k)
    jobs = tuple((t % variant_count, seeds[t % k]) for t in range(total))
    return RegenerationPlan(jobs=jobs, variant_count=variant_count, degraded=True)


class Orchestrator:
    def __init__(self, backends: BackendSet, profile: BackendProfile | None = None):
        self.raw_backends = backends
        self.profile = profile

    # --- public entry points -----------------------------------------------

    def run(self, config: RunConfig, prompt: PromptRecord, run_dir: str | Path | None = None) -> RunResult:
        if config.mode == "bon":
            return self._run(config, prompt, run_dir, bon=True)
        return self._run(config, prompt, run_dir, bon=False)

    # --- run machinery -------------------------------------------------------

    def _run(self, config: RunConfig, prompt: PromptRecord, run_dir, bon: bool) -> RunResult:
        rd: RunDir | None = None
        log = EventLog()
        if run_dir is not None:
            rd = RunDir(run_dir).create()
            log = EventLog(rd.events_path)
            rd.write_config(self._manifest(config, prompt))

        ledger = BudgetLedger(nfe_budget=config.nfe_budget)
        backends = _counted_backends(self.raw_backends, ledger)
        verifier = Verifier(backends)
        redesigner = Redesigner(backends)
        warnings: list[str] = []

        log.append(
            "run_started",
            {
                "config": records.to_record(config),
                "prompt": records.to_record(prompt),
                "profile_fingerprint": config.profile_fingerprint,
                "backend_fingerprints": self.raw_backends.fingerprints(),
            },
        )

        conditioning = prompt
        with self._staged(ledger, "revision"):
            if config.expand_first:
                elements_for_expansion = verifier.decompose(prompt, config.media_kind).elements
                conditioning = redesigner.standard_expand(prompt, elements_for_expansion)
                log.append("prompt_expanded", {"prompt": records.to_record(conditioning)})

        with self._staged(ledger, "verification"):
            decomposition = verifier.decompose(prompt, config.media_kind)
        log.append("decomposition", {"decomposition": records.to_record(decomposition)})

        state = _RunState(config, prompt, decomposition, verifier, ledger, log)

        first_phase = config.first_phase if not bon else config.total_samples
        log.append("iteration_started", {"iteration": 0, "batch_size": first_phase})
        for index in range(first_phase):
            seed = rng.hash_u64(config.run_seed, "seed", index)
            state.produce(conditioning, seed, iteration=0)

        if not bon:
            warnings.extend(self._revision_loop(state, redesigner, conditioning))

        if not state.pool:
            raise EngineError("no candidate completed; run failed")

        best = best_candidate(state.pool)
        log.append(
            "final_selection",
            {
                "candidate_id": best.candidate_id,
                "score": records.to_record(best.score),
                "scalar_reward": best.scalar_reward,
            },
        )
        log.append(
            "run_finished",
            {
                "ledger": records.to_record(ledger),
                "completed": len(state.pool),
                "failed": state.failed,
            },
        )
        log.close()
        if rd is not None:
            rd.write_artifacts(state.artifact_index())
            rd.write_timings(
                {"wall_clock_by_stage": ledger.wall_clock_by_stage, "unit": "seconds"}
            )
        return RunResult(
            best=best,
            candidates=tuple(state.pool),
            ledger=ledger,
            decomposition=decomposition,
            events=tuple(log.entries),
            run_dir=None if rd is None else rd.path,
            warnings=tuple(warnings),
        )

    def _revision_loop(
        self, state: "_RunState", redesigner: Redesigner, conditioning: PromptRecord
    ) -> list[str]:
        config, log, ledger = state.config, state.log, state.ledger
        warnings: list[str] = []
        remaining = config.total_samples - config.first_phase
        sizes = [remaining // config.iterations] * config.iterations
        sizes[-1] += remaining % config.iterations

        for iteration, batch_size in enumerate(sizes, start=1):
            if batch_size < 1:
                continue
            log.append("iteration_started", {"iteration": iteration, "batch_size": batch_size})
            pool = state.pool if config.accumulate_pool else state.last_batch
            with self._staged(ledger, "selection"):
                selection = select_top_k(
                    pool,
                    config.top_k,
                    core_only=config.core_only_coverage,
                    elements=state.decomposition.elements,
                )
                reports = {c.candidate_id: c.report for c in pool if c.report is not None}
                diagnosis = diagnose(
                    selection,
                    reports,
                    state.decomposition.elements,
                    threshold=Fraction(*config.failure_threshold),
                )
            log.append("selection", {"selection": records.to_record(selection), "iteration": iteration})
            log.append("diagnosis", {"diagnosis": records.to_record(diagnosis), "iteration": iteration})

            per_sample = config.mode == "pris_per_sample"
            seeds_by_candidate = {c.candidate_id: c.seed for c in pool}
            plan = plan_regeneration(
                config, selection, seeds_by_candidate, n_regen=batch_size, per_sample=per_sample
            )

            with self._staged(ledger, "revision"):
                variants, mode_used, fell_back = self._make_variants(
                    state, redesigner, selection, diagnosis, plan, iteration, per_sample, reports
                )
            if fell_back:
                warnings.append(
                    f"iteration {iteration}: failure-targeted revision was unfaithful; "
                    "fell back to exploration"
                )
                log.append(
                    "revision_warning",
                    {"iteration": iteration, "fallback": "exploration"},
                )
            log.append(
                "revision",
                {
                    "iteration": iteration,
                    "mode": mode_used,
                    "variants": [records.to_record(v) for v in variants],
                    "rewriter_fingerprint": self.raw_backends.rewriter.fingerprint,
                },
            )
            log.append(
                "regeneration_plan",
                {"iteration": iteration, "plan": records.to_record(plan)},
            )

            for variant_index, seed in plan.jobs:
                state.produce(variants[variant_index], seed, iteration=iteration)
        return warnings

    def _make_variants(
        self,
        state: "_RunState",
        redesigner: Redesigner,
        selection: TopKSelection,
        diagnosis,
        plan: RegenerationPlan,
        iteration: int,
        per_sample: bool,
        reports,
    ) -> tuple[list[PromptRecord], str, bool]:
        original = state.prompt
        elements = state.decomposition.elements
        if per_sample:
            variants = [
                redesigner.revise_per_sample(
                    original, reports[cid], elements, iteration=iteration, index=index
                )
                for index, cid in enumerate(selection.chosen)
            ]
            return variants, RevisionMode.PER_SAMPLE.value, False

        satisfied = tuple(
            eid
            for eid, (hits, k) in sorted(diagnosis.per_element_success.items())
            if eid not in diagnosis.common_failures
        )
        if diagnosis.common_failures:
            request = RevisionRequest(
                parent=original,
                elements=elements,
                common_failures=diagnosis.common_failures,
                satisfied=satisfied,
                mode=RevisionMode.FAILURE_TARGETED,
                variant_count=plan.variant_count,
                iteration=iteration,
            )
            try:
                return list(redesigner.revise(request).variants), request.mode.value, False
            except UnfaithfulRevision:
                pass  # fall through to exploration below, recorded by caller
            fell_back = True
        else:
            fell_back = False
        request = RevisionRequest(
            parent=original,
            elements=elements,
            common_failures=(),
            satisfied=tuple(e.element_id for e in elements),
            mode=RevisionMode.EXPLORATION,
            variant_count=plan.variant_count,
            iteration=iteration,
        )
        return list(redesigner.revise(request).variants), request.mode.value, fell_back

    def _manifest(self, config: RunConfig, prompt: PromptRecord) -> dict:
        profile_payload = None if self.profile is None else self.profile.to_payload()
        return {
            "record": "run_manifest",
            "v": 1,
            "config": records.to_record(config),
            "prompt": records.to_record(prompt),
            "profile": profile_payload,
        }

    @staticmethod
    @contextmanager
    def _staged(ledger: BudgetLedger, stage: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            ledger.add_wall_clock(stage, time.perf_counter() - start)


class _RunState:
    """Mutable per-run candidate pool and production pipeline."""

    def __init__(self, config, prompt, decomposition, verifier, ledger, log):
        self.config = config
        self.prompt = prompt
        self.decomposition = decomposition
        self.verifier = verifier
        self.ledger = ledger
        self.log = log
        self.pool: list[Candidate] = []
        self.last_batch: list[Candidate] = []
        self.failed = 0
        self._counter = 0
        self._current_iteration: int | None = None

    def produce(self, conditioning: PromptRecord, seed: int, iteration: int) -> None:
        candidate_id = f"c{self._counter:04d}"
        self._counter += 1
        if iteration != self._current_iteration:
            self._current_iteration = iteration
            self.last_batch = []

        # the compute is spent whether or not the sample completes; charge first
        self.ledger.charge_generation(self.config.denoising_steps, self.config.cfg_enabled)
        try:
            start = time.perf_counter()
            visual = self.verifier.backends.generator.generate(
                conditioning, seed, self.config.denoising_steps, self.config.cfg_enabled
            )
            self.ledger.add_wall_clock("generation", time.perf_counter() - start)
        except BackendError as exc:
            self.failed += 1
            self.log.append(
                "candidate_failed",
                {
                    "candidate_id": candidate_id,
                    "prompt_id": conditioning.prompt_id,
                    "seed": seed,
                    "stage": "generation",
                    "error": str(exc),
                },
            )
            return

        candidate = Candidate(
            candidate_id=candidate_id,
            prompt_id=conditioning.prompt_id,
            seed=seed,
            visual=visual,
        )
        self.log.append(
            "candidate_generated",
            {"candidate": records.to_record(candidate), "iteration": iteration},
        )
        try:
            start = time.perf_counter()
            report = self.verifier.verify(self.decomposition, visual, candidate_id=candidate_id)
            candidate = candidate.with_report(report, self.decomposition.elements)
            self.ledger.add_wall_clock("verification", time.perf_counter() - start)
            start = time.perf_counter()
            reward = self.verifier.backends.reward.score(self.prompt, visual)
            candidate = candidate.with_reward(reward)
            self.ledger.add_wall_clock("reward", time.perf_counter() - start)
        except BackendError as exc:
            self.failed += 1
            self.log.append(
                "candidate_failed",
                {
                    "candidate_id": candidate_id,
                    "prompt_id": conditioning.prompt_id,
                    "seed": seed,
                    "stage": "verification",
                    "error": str(exc),
                },
            )
            return
        self.log.append(
            "candidate_verified",
            {
                "candidate_id": candidate_id,
                "report": records.to_record(report),
                "score": records.to_record(candidate.score),
            },
        )
        self.log.append(
            "candidate_scored",
            {
                "candidate_id": candidate_id,
                "scalar_reward": candidate.scalar_reward,
                "scored_prompt_id": self.prompt.prompt_id,
            },
        )
        self.pool.append(candidate)
        self.last_batch.append(candidate)

    def artifact_index(self) -> dict:
        return {
            "record": "artifact_index",
            "v": 1,
            "artifacts": {
                c.candidate_id: {
                    "uri": c.visual.uri,
                    "media_kind": c.visual.media_kind,
                    "frame_count": c.visual.frame_count,
                }
                for c in self.pool
            },
        }


def ledger_from_events(entries: list[dict], config: RunConfig) -> int:
    """Recompute NFE usage from the event log alone."""
    generated = sum(1 for _ in events_of_type(entries, "candidate_generated"))
    failed_generation = sum(
        1
        for payload in events_of_type(entries, "candidate_failed")
        if payload["stage"] == "generation"
    )
    return compute_nfe(generated + failed_generation, config.denoising_steps, config.cfg_enabled)


def run_with_profile(
    profile: BackendProfile,
    config: RunConfig,
    prompt: PromptRecord,
    run_dir: str | Path | None = None,
    http_client=None,
) -> RunResult:
    backends = build_backends(profile, http_client=http_client)
    orchestrator = Orchestrator(backends, profile=profile)
    return orchestrator.run(config, prompt, run_dir)


def replay(run_dir: str | Path, out_dir: str | Path) -> tuple[bool, list[str]]:
    """Re-run a simulated run from its manifest and compare byte-for-byte."""
    source = RunDir(run_dir)
    manifest = source.read_config()
    if manifest.get("profile") is None:
        raise EngineError("run manifest carries no backend profile; cannot replay")
    profile = BackendProfile.from_payload(manifest["profile"])
    if not profile.fully_simulated:
        raise EngineError("replay requires a fully simulated backend profile")
    config = records.from_record(manifest["config"])
    prompt = records.from_record(manifest["prompt"])

    run_with_profile(profile, config, prompt, run_dir=out_dir)
    replayed = RunDir(out_dir)

    differences: list[str] = []
    if source.events_path.read_bytes() != replayed.events_path.read_bytes():
        differences.append("events.log differs")
    if source.summary_path.exists():
        from .reporting import render  # local import; reporting reads logs only

        render(replayed.path)
        if source.summary_path.read_bytes() != replayed.summary_path.read_bytes():
            differences.append("summary.json differs")
        if source.report_path.read_bytes() != replayed.report_path.read_bytes():
            differences.append("report.md differs")
    return (not differences), differences
