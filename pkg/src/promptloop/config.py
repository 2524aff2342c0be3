"""Run configuration, regeneration planning data, and budget accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import BudgetExceeded

MODES = ("bon", "pris", "pris_per_sample")


def compute_nfe(n_samples: int, steps: int, cfg_enabled: bool) -> int:
    """Denoising-network evaluations: doubled per step under cfg."""
    if n_samples < 1 or steps < 1:
        raise ValueError("n_samples and steps must be positive")
    return n_samples * steps * (2 if cfg_enabled else 1)


@dataclass(frozen=True)
class RunConfig:
    mode: str
    total_samples: int
    first_phase: int
    top_k: int
    denoising_steps: int
    cfg_enabled: bool
    iterations: int
    run_seed: int
    nfe_budget: int
    media_kind: str = "image"
    expand_first: bool = False
    accumulate_pool: bool = True
    core_only_coverage: bool = False
    failure_threshold: tuple[int, int] = (1, 2)
    profile_fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.total_samples < 1:
            raise ValueError("total_samples must be positive")
        if self.mode == "bon":
            if self.iterations != 0:
                raise ValueError("bon runs take iterations=0")
        else:
            if self.iterations < 1:
                raise ValueError("revision runs take iterations >= 1")
            if not self.first_phase < self.total_samples:
                raise ValueError("first_phase must be smaller than total_samples")
        if not 1 <= self.top_k <= self.first_phase:
            raise ValueError("top_k must satisfy 1 <= k <= first_phase")
        if self.denoising_steps < 1:
            raise ValueError("denoising_steps must be positive")
        num, den = self.failure_threshold
        if not (0 < num < den):
            raise ValueError("failure_threshold must be a fraction in (0, 1)")
        if self.nfe_budget < compute_nfe(self.total_samples, self.denoising_steps, self.cfg_enabled):
            raise ValueError("nfe_budget below the configured sample count")

    @property
    def nfe_per_sample(self) -> int:
        return self.denoising_steps * (2 if self.cfg_enabled else 1)


def make_run_config(
    mode: str,
    total_samples: int,
    *,
    first_phase: int | None = None,
    top_k: int | None = None,
    denoising_steps: int = 50,
    cfg_enabled: bool = True,
    iterations: int | None = None,
    run_seed: int = 0,
    nfe_budget: int | None = None,
    **extra,
) -> RunConfig:
    """Build a RunConfig with the default splits M=N//2 and k=ceil(N/4)."""
    if first_phase is None:
        first_phase = total_samples if mode == "bon" else total_samples // 2
    if top_k is None:
        top_k = min(math.ceil(total_samples / 4), first_phase)
    if iterations is None:
        iterations = 0 if mode == "bon" else 1
    if nfe_budget is None:
        nfe_budget = compute_nfe(total_samples, denoising_steps, cfg_enabled)
    return RunConfig(
        mode=mode,
        total_samples=total_samples,
        first_phase=first_phase,
        top_k=top_k,
        denoising_steps=denoising_steps,
        cfg_enabled=cfg_enabled,
        iterations=iterations,
        run_seed=run_seed,
        nfe_budget=nfe_budget,
        **extra,
    )


@dataclass(frozen=True)
class RegenerationPlan:
    """The (prompt-variant x reused-seed) job matrix for a regeneration phase."""

    jobs: tuple[tuple[int, int], ...]  # (variant_index, seed)
    variant_count: int
    degraded: bool = False

    def __post_init__(self) -> None:
        if self.variant_count < 1:
            raise ValueError("variant_count must be positive")
        for variant_index, _ in self.jobs:
            if not 0 <= variant_index < self.variant_count:
                raise ValueError("job references a variant outside the plan")


@dataclass
class BudgetLedger:
    """NFE and wall-clock accounting for one run.

    NFE charges are refused, never truncated: a generation that would exceed
    the budget raises before the backend is called. Wall-clock durations are
    metadata and live outside the replay-checked event log.
    """

    nfe_budget: int
    nfe_used: int = 0
    wall_clock_by_stage: dict[str, float] = field(default_factory=dict)
    calls_by_backend: dict[str, int] = field(default_factory=dict)

    def charge_generation(self, steps: int, cfg_enabled: bool) -> int:
        cost = compute_nfe(1, steps, cfg_enabled)
        if self.nfe_used + cost > self.nfe_budget:
            raise BudgetExceeded(
                f"generation needs {cost} NFE but only "
                f"{self.nfe_budget - self.nfe_used} of {self.nfe_budget} remain"
            )
        self.nfe_used += cost
        return cost

    def record_call(self, backend_kind: str, count: int = 1) -> None:
        self.calls_by_backend[backend_kind] = self.calls_by_backend.get(backend_kind, 0) + count

    def add_wall_clock(self, stage: str, seconds: float) -> None:
        self.wall_clock_by_stage[stage] = self.wall_clock_by_stage.get(stage, 0.0) + seconds
