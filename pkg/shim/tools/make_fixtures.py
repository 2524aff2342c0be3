"""Regenerate the engine's golden wire fixtures from the shim.

Run from the repository root after changing the wire protocol or the toy
models:

    python3 shim/tools/make_fixtures.py

The fixtures freeze one request/response pair per capability. They replay
in filename order; the generator fixture runs first so later fixtures can
reference its artifact.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from promptloop.backends.wire import make_request
from promptloop.records import canonical_json

from modelshim.config import ShimConfig, default_instruction_dir
from modelshim.server import ShimService

PROMPT = "a red circle and a blue square on a white background"
SEED = 7
OUT_DIR = Path(__file__).resolve().parents[2] / "src/promptloop/fixtures/wire"


def pick_seed(service: ShimService) -> int:
    # freeze a seed whose rendering keeps both shapes, so the caption,
    # probe, and reward fixtures exercise the positive paths
    for seed in range(SEED, SEED + 50):
        name = service.toy.generate(PROMPT, seed, 8, True)
        if len(service.toy.read_scene(name)) == 2:
            return seed
    raise RuntimeError("no seed keeps both shapes; widen the scan")


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        config = ShimConfig(artifact_dir=Path(tmp), instruction_dir=default_instruction_dir())
        service = ShimService(config)
        seed = pick_seed(service)

        generate_request = make_request(
            "generator",
            "",
            {
                "prompt_id": "fixture-p0",
                "prompt_text": PROMPT,
                "seed": seed,
                "steps": 8,
                "cfg": True,
                "sampler_options": {},
            },
        )
        generate_response = service.call(generate_request)
        visual_uri = generate_response["payload"]["visual_uri"]

        fixtures = [
            ("01_generator", generate_request, generate_response),
            (
                "02_captioner",
                make_request(
                    "captioner",
                    "caption_image.v1",
                    {"visual_uri": visual_uri, "media_kind": "image", "frame_count": 1},
                ),
                None,
            ),
            (
                "03_prober_open",
                make_request(
                    "prober",
                    "probe_open.v1",
                    {
                        "visual_uri": visual_uri,
                        "media_kind": "image",
                        "question": "what matches this description in the image: a red circle?",
                    },
                ),
                None,
            ),
            (
                "04_prober_binary",
                make_request(
                    "prober",
                    "probe_binary.v1",
                    {
                        "visual_uri": visual_uri,
                        "media_kind": "image",
                        "question": "does the image show a blue square?",
                    },
                ),
                None,
            ),
            (
                "05_nli_entailment",
                make_request(
                    "nli",
                    "nli.v1",
                    {
                        "premise": "The image shows a red circle and a blue square.",
                        "hypothesis": "a red circle",
                    },
                ),
                None,
            ),
            (
                "06_nli_contradiction",
                make_request(
                    "nli",
                    "nli.v1",
                    {
                        "premise": "there is no red circle; the image shows a blue square",
                        "hypothesis": "a red circle",
                    },
                ),
                None,
            ),
            (
                "07_nli_neutral",
                make_request(
                    "nli",
                    "nli.v1",
                    {
                        "premise": "The image shows a blue square.",
                        "hypothesis": "a red circle",
                    },
                ),
                None,
            ),
            (
                "08_decomposer",
                make_request(
                    "decomposer",
                    "decompose_image.v1",
                    {"prompt_id": "fixture-p0", "prompt_text": PROMPT, "media_kind": "image"},
                ),
                None,
            ),
            (
                "09_rewriter",
                make_request(
                    "rewriter",
                    "rewrite_failure_targeted.v1",
                    {
                        "mode": "failure_targeted",
                        "parent_text": PROMPT,
                        "elements": [
                            {"element_id": 0, "text": "a red circle", "importance": "core"},
                            {"element_id": 1, "text": "a blue square", "importance": "core"},
                            {"element_id": 2, "text": "a white background", "importance": "extra"},
                        ],
                        "failure_ids": [0],
                        "satisfied_ids": [1, 2],
                        "variant_index": 0,
                        "attempt": 1,
                    },
                ),
                None,
            ),
            (
                "10_reward",
                make_request(
                    "reward",
                    "reward.v1",
                    {"prompt_text": PROMPT, "visual_uri": visual_uri, "media_kind": "image"},
                ),
                None,
            ),
        ]

        OUT_DIR.mkdir(parents=True, exist_ok=True)
        for name, request, response in fixtures:
            if response is None:
                response = service.call(request)
            body = {"fixture": name, "request": request, "response": response}
            path = OUT_DIR / f"{name}.json"
            path.write_text(canonical_json(body) + "\n", encoding="utf-8")
            print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
