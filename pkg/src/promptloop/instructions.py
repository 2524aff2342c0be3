"""Versioned backend instruction texts.

The texts live as files under ``promptloop/instructions`` and are fingerprinted
into decomposition results, backend profiles, and run logs, so results remain
attributable as the instructions evolve. Remote backends (the model shim)
read the same files; simulated backends carry the ids for fingerprint parity.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from importlib import resources

# role -> instruction id (file stem under instructions/)
DEFAULT_INSTRUCTIONS: dict[str, str] = {
    "decompose_image": "decompose_image.v1",
    "decompose_video": "decompose_video.v1",
    "caption_image": "caption_image.v1",
    "caption_video": "caption_video.v1",
    "nli": "nli.v1",
    "probe_open": "probe_open.v1",
    "probe_binary": "probe_binary.v1",
    "rewrite_failure_targeted": "rewrite_failure_targeted.v1",
    "rewrite_exploration": "rewrite_exploration.v1",
    "rewrite_standard_expansion": "rewrite_standard_expansion.v1",
    "rewrite_per_sample": "rewrite_per_sample.v1",
    "reward": "reward.v1",
}


@lru_cache(maxsize=None)
def instruction_text(instruction_id: str) -> str:
    path = resources.files("promptloop").joinpath("instructions", f"{instruction_id}.txt")
    return path.read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def instruction_digest(instruction_id: str) -> str:
    text = instruction_text(instruction_id)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def instructions_fingerprint(instruction_ids: tuple[str, ...]) -> str:
    """Stable digest over a set of instruction ids and their texts."""
    h = hashlib.sha256()
    for instruction_id in sorted(set(instruction_ids)):
        h.update(instruction_id.encode("utf-8"))
        h.update(b"\x00")
        h.update(instruction_digest(instruction_id).encode("ascii"))
        h.update(b"\x00")
    return h.hexdigest()[:16]
