"""Command-line interface: run, replay, report, and bench."""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from .backends.profile import BackendProfile, build_backends, simulated_profile
from .backends.simulated import SimElementSpec, SimWorld
from .bench import (
    bench_report,
    build_strategy,
    evaluate,
    load_manifest,
    synthetic_entries,
    synthetic_world,
    write_manifest,
)
from .config import make_run_config
from .core import PromptRecord
from .orchestrator import replay, run_with_profile
from .records import canonical_json
from .reporting import render


def demo_world() -> SimWorld:
    """A small image world with one hard, emphasis-sensitive element."""
    return SimWorld(
        world_seed=11,
        media_kind="image",
        caption_omission_prob=0.1,
        elements=(
            SimElementSpec(0, "a single leather shoe", base_prob=0.95, emphasis_gain=0.3),
            SimElementSpec(
                1,
                "the shoe has no laces",
                base_prob=0.15,
                emphasis_gain=0.8,
                seed_affinity_spread=0.6,
            ),
            SimElementSpec(2, "the shoe stands alone", base_prob=0.7, emphasis_gain=0.5),
            SimElementSpec(
                3, "soft studio lighting", importance="extra",
                semantic_category="property", base_prob=0.8, emphasis_gain=0.3,
            ),
            SimElementSpec(
                4, "a neutral background", importance="extra",
                semantic_category="property", base_prob=0.9,
            ),
        ),
    )


def _load_profile(spec: str) -> BackendProfile:
    if spec == "demo":
        return simulated_profile(demo_world())
    return BackendProfile.load(spec)


def _cmd_run(args: argparse.Namespace) -> int:
    profile = _load_profile(args.backend)
    mode = args.mode.replace("-", "_")
    config = make_run_config(
        mode=mode,
        total_samples=args.n,
        first_phase=args.m,
        top_k=args.k,
        denoising_steps=args.steps,
        cfg_enabled=args.cfg,
        iterations=args.iterations,
        run_seed=args.seed,
        expand_first=args.expand,
        profile_fingerprint=profile.fingerprint,
    )
    if args.prompt is not None:
        prompt = PromptRecord(prompt_id=args.prompt_id, text=args.prompt)
    elif profile.sim_world is not None:
        prompt = PromptRecord(prompt_id=args.prompt_id, text=profile.sim_world.base_prompt_text())
    else:
        print("error: --prompt is required for non-simulated profiles", file=sys.stderr)
        return 2
    result = run_with_profile(profile, config, prompt, run_dir=args.out)
    render(args.out)
    best = result.best
    print(f"run complete: {len(result.candidates)} candidates, best {best.candidate_id}")
    print(
        f"best score: core {best.score.core_hits}/{best.score.core_total}, "
        f"extra {best.score.extra_hits}/{best.score.extra_total}, reward {best.scalar_reward:.4f}"
    )
    print(f"NFE used: {result.ledger.nfe_used}/{result.ledger.nfe_budget}")
    for warning in result.warnings:
        print(f"warning: {warning}")
    print(f"report: {Path(args.out) / 'report.md'}")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    out = args.out or tempfile.mkdtemp(prefix="promptloop-replay-")
    identical, differences = replay(args.run_dir, out)
    if identical:
        print(f"replay identical (replayed into {out})")
        return 0
    print("replay DIFFERS: " + "; ".join(differences))
    return 1


def _cmd_report(args: argparse.Namespace) -> int:
    summary_path, report_path = render(args.run_dir)
    print(f"wrote {summary_path}")
    print(f"wrote {report_path}")
    return 0


def _cmd_bench_run(args: argparse.Namespace) -> int:
    profile = _load_profile(args.backend)
    backends = build_backends(profile)
    entries = load_manifest(args.manifest)
    strategy = build_strategy(
        args.strategy,
        backends=backends,
        world=profile.sim_world,
        media_kind=args.media_kind,
        seed=args.seed,
    )
    result = evaluate(strategy, entries, reward_backend=backends.reward)
    summary_path, report_path = bench_report(result, args.out)
    print(
        f"strategy {result.strategy_kind}: accuracy {result.overall_accuracy:.3f} "
        f"({result.hits}/{result.evaluated}, {len(result.failed_entries)} failed)"
    )
    for category, accuracy in result.per_category_accuracy().items():
        print(f"  {category}: {accuracy:.3f}")
    print(f"wrote {summary_path}")
    print(f"wrote {report_path}")
    return 0


def _cmd_bench_synth(args: argparse.Namespace) -> int:
    world = synthetic_world(n_elements=args.elements, world_seed=args.world_seed)
    entries = synthetic_entries(world, args.entries, seed=args.seed, pool_size=args.pool_size)
    write_manifest(entries, args.out)
    profile = simulated_profile(world)
    profile_path = Path(args.out).with_suffix(".profile.json")
    profile.save(profile_path)
    print(f"wrote {args.entries} entries to {args.out}")
    print(f"wrote matching backend profile to {profile_path}")
    return 0


def _cmd_init_profile(args: argparse.Namespace) -> int:
    profile = simulated_profile(demo_world())
    Path(args.out).write_text(canonical_json(profile.to_payload()) + "\n", encoding="utf-8")
    print(f"wrote demo simulated profile to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptloop",
        description="Inference-time scaling for text-to-visual generation with "
        "element-level verification and failure-driven prompt redesign.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a generation run")
    run.add_argument("--mode", choices=("bon", "pris", "pris-per-sample"), default="pris")
    run.add_argument("--n", type=int, default=20, help="total samples N")
    run.add_argument("--m", type=int, default=None, help="first-phase samples (default N//2)")
    run.add_argument("--k", type=int, default=None, help="top-k selection size (default ceil(N/4))")
    run.add_argument("--steps", type=int, default=50, help="denoising steps per sample")
    run.add_argument("--cfg", action=argparse.BooleanOptionalAction, default=True,
                     help="classifier-free guidance (doubles NFE per step)")
    run.add_argument("--iterations", type=int, default=None,
                     help="revision rounds (0=best-of-N, default 1 for pris modes)")
    run.add_argument("--backend", default="demo", help="backend profile path, or 'demo'")
    run.add_argument("--seed", type=int, default=0, help="run seed")
    run.add_argument("--out", required=True, help="run directory")
    run.add_argument("--prompt", default=None, help="prompt text (defaults to the simulated world's)")
    run.add_argument("--prompt-id", default="p0")
    run.add_argument("--expand", action="store_true", help="apply standard prompt expansion first")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("replay", help="re-run from a run directory and compare byte-for-byte")
    rep.add_argument("run_dir")
    rep.add_argument("--out", default=None, help="directory for the replayed run")
    rep.set_defaults(func=_cmd_replay)

    report = sub.add_parser("report", help="render summary.json and report.md from the event log")
    report.add_argument("run_dir")
    report.set_defaults(func=_cmd_report)

    bench = sub.add_parser("bench", help="verifier benchmark harness")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)

    bench_run = bench_sub.add_parser("run", help="evaluate a strategy on a manifest")
    bench_run.add_argument("--manifest", required=True)
    bench_run.add_argument("--strategy", required=True,
                           choices=("scalar_reward", "decomposed_binary_vqa", "efc", "oracle", "random"))
    bench_run.add_argument("--backend", required=True, help="backend profile path, or 'demo'")
    bench_run.add_argument("--media-kind", default="video", choices=("image", "video"))
    bench_run.add_argument("--seed", type=int, default=0)
    bench_run.add_argument("--out", required=True)
    bench_run.set_defaults(func=_cmd_bench_run)

    bench_synth = bench_sub.add_parser("synth", help="generate a synthetic benchmark manifest")
    bench_synth.add_argument("--out", required=True)
    bench_synth.add_argument("--entries", type=int, default=100)
    bench_synth.add_argument("--seed", type=int, default=0)
    bench_synth.add_argument("--pool-size", type=int, default=4)
    bench_synth.add_argument("--elements", type=int, default=4)
    bench_synth.add_argument("--world-seed", type=int, default=7)
    bench_synth.set_defaults(func=_cmd_bench_synth)

    init = sub.add_parser("init-profile", help="write the demo simulated backend profile")
    init.add_argument("--out", required=True)
    init.set_defaults(func=_cmd_init_profile)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
