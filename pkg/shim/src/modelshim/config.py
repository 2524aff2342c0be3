"""Shim configuration: model bindings, store paths, instruction templates."""

from __future__ import annotations

import importlib.util
from dataclasses import dataclass, field
from pathlib import Path

CAPABILITIES = (
    "generator",
    "captioner",
    "prober",
    "nli",
    "decomposer",
    "rewriter",
    "reward",
)

# The toy family is the only one loadable without model weights; hosted
# model identifiers stay configuration and leave the capability unserved
# until a loader for them exists.
TOY_MODELS = {
    "generator": "toy-shape-renderer-v1",
    "captioner": "toy-pixel-captioner-v1",
    "prober": "toy-pixel-vqa-v1",
    "nli": "toy-lexical-nli-v1",
    "decomposer": "toy-scene-decomposer-v1",
    "rewriter": "toy-template-rewriter-v1",
    "reward": "toy-adherence-reward-v1",
}


def default_instruction_dir() -> Path:
    """Locate the engine's versioned instruction directory on this system."""
    spec = importlib.util.find_spec("promptloop")
    if spec is None or not spec.submodule_search_locations:
        raise FileNotFoundError(
            "cannot locate the engine's instruction directory; pass instruction_dir explicitly"
        )
    return Path(list(spec.submodule_search_locations)[0]) / "instructions"


@dataclass
class ShimConfig:
    artifact_dir: Path
    instruction_dir: Path
    models: dict[str, str] = field(default_factory=lambda: dict(TOY_MODELS))
    device: str = "cpu"
    precision: str = "fp32"
    image_size: int = 96
    frame_sampling: str = "uniform"  # video frame policy, reported in responses

    def __post_init__(self) -> None:
        self.artifact_dir = Path(self.artifact_dir)
        self.instruction_dir = Path(self.instruction_dir)
        if not self.instruction_dir.is_dir():
            raise FileNotFoundError(f"instruction directory not found: {self.instruction_dir}")

    def served_capabilities(self) -> list[str]:
        return [
            capability
            for capability in CAPABILITIES
            if self.models.get(capability, "").startswith("toy-")
        ]

    def available_instructions(self) -> list[str]:
        return [path.stem for path in sorted(self.instruction_dir.glob("*.txt"))]

    def instruction_text(self, instruction_id: str) -> str:
        path = self.instruction_dir / f"{instruction_id}.txt"
        if not path.is_file():
            raise KeyError(instruction_id)
        return path.read_text(encoding="utf-8")
