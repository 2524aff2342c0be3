"""Toy model family: small real models over real image files.

The generator renders colored shapes parsed from the prompt into a PNG;
whether a requested shape actually appears depends on the seed, and shapes
the prompt mentions more than once almost always survive, so prompt
emphasis has a real effect through the pixels. The captioner, prober, and
reward model never look at the prompt side-channel: they re-read the pixels.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw

PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (220, 50, 47),
    "green": (0, 150, 80),
    "blue": (38, 110, 230),
    "yellow": (235, 200, 40),
    "purple": (150, 60, 190),
    "orange": (250, 140, 30),
    "black": (30, 30, 30),
}
SHAPES = ("circle", "square", "triangle")
BACKGROUND = (255, 255, 255)

# a singly-mentioned shape frequently drops out; mentioning it again pins it
DROP_PROB_SINGLE = 0.45
DROP_PROB_EMPHASIZED = 0.05

_STOPWORDS = frozenset(
    "a an the is are of and with shows image picture on in to that this it its "
    "make sure include rendered crisp detail clean backdrop rephrased take".split()
)
_NEGATIONS = ("no", "not", "without")


def _hash_unit(*parts) -> float:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big") / 2.0**64


def parse_scene(text: str) -> list[tuple[str, str, int]]:
    """(color, shape, mention_count) pairs in first-mention order.

    A pair is a palette color followed by a shape word within two tokens.
    One shape per color; later conflicting mentions count as emphasis.
    """
    tokens = re.findall(r"[a-z]+", text.lower())
    found: dict[str, tuple[str, int]] = {}
    order: list[str] = []
    for index, token in enumerate(tokens):
        if token not in PALETTE:
            continue
        for lookahead in tokens[index + 1: index + 3]:
            if lookahead in SHAPES:
                if token not in found:
                    found[token] = (lookahead, 1)
                    order.append(token)
                else:
                    shape, count = found[token]
                    found[token] = (shape, count + 1)
                break
    return [(color, found[color][0], found[color][1]) for color in order]


def parse_background(text: str) -> str | None:
    match = re.search(r"on a (\w+) background", text.lower())
    return match.group(1) if match else None


@dataclass
class ToyModels:
    artifact_dir: Path
    image_size: int = 96

    # --- generation -------------------------------------------------------

    def generate(self, prompt_text: str, seed: int, steps: int, cfg: bool) -> str:
        """Render the scene; returns the artifact name of the PNG."""
        pairs = parse_scene(prompt_text)
        size = self.image_size
        image = Image.new("RGB", (size, size), BACKGROUND)
        draw = ImageDraw.Draw(image)
        kept = []
        for color, shape, mentions in pairs:
            drop = DROP_PROB_SINGLE if mentions == 1 else DROP_PROB_EMPHASIZED
            if _hash_unit("drop", seed, color, shape, prompt_text) < drop:
                continue
            kept.append((color, shape))
        for slot, (color, shape) in enumerate(kept):
            self._draw_shape(draw, slot, len(kept), color, shape, seed)
        name = self.artifact_name(prompt_text, seed, steps, cfg)
        self.artifact_dir.mkdir(parents=True, exist_ok=True)
        image.save(self.artifact_dir / name, format="PNG")
        return name

    def artifact_name(self, prompt_text: str, seed: int, steps: int, cfg: bool) -> str:
        h = hashlib.blake2b(digest_size=8)
        for part in (prompt_text, seed, steps, cfg, self.image_size):
            h.update(str(part).encode("utf-8"))
            h.update(b"\x1f")
        return f"toy-{h.hexdigest()}.png"

    def _draw_shape(self, draw, slot: int, total: int, color: str, shape: str, seed: int) -> None:
        size = self.image_size
        # keep shapes clear of each other so pixel classification stays exact
        radius = max(8, size // (2 * total + 2) - 2)
        cx = int((slot + 1) * size / (total + 1))
        cy = size // 2 + int((_hash_unit("y", seed, color) - 0.5) * size * 0.2)
        rgb = PALETTE[color]
        if shape == "circle":
            draw.ellipse((cx - radius, cy - radius, cx + radius, cy + radius), fill=rgb)
        elif shape == "square":
            draw.rectangle((cx - radius, cy - radius, cx + radius, cy + radius), fill=rgb)
        else:  # triangle
            draw.polygon(
                [(cx, cy - radius), (cx - radius, cy + radius), (cx + radius, cy + radius)],
                fill=rgb,
            )

    # --- pixel reading ------------------------------------------------------

    def read_scene(self, artifact: str) -> list[tuple[str, str]]:
        """Recover (color, shape) pairs from pixels, left to right."""
        image = Image.open(self.artifact_dir / artifact).convert("RGB")
        width, height = image.size
        pixels = image.load()
        boxes: dict[tuple[int, int, int], list[int]] = {}
        for y in range(height):
            for x in range(width):
                rgb = pixels[x, y]
                if rgb == BACKGROUND:
                    continue
                box = boxes.setdefault(rgb, [x, y, x, y, 0])
                box[0] = min(box[0], x)
                box[1] = min(box[1], y)
                box[2] = max(box[2], x)
                box[3] = max(box[3], y)
                box[4] += 1
        by_color = {rgb: name for name, rgb in PALETTE.items()}
        found = []
        for rgb, (x0, y0, x1, y1, count) in boxes.items():
            color = by_color.get(rgb)
            if color is None:
                continue
            area = (x1 - x0 + 1) * (y1 - y0 + 1)
            fill = count / area
            if fill >= 0.93:
                shape = "square"
            elif fill >= 0.68:
                shape = "circle"
            else:
                shape = "triangle"
            found.append((x0, color, shape))
        return [(color, shape) for _, color, shape in sorted(found)]

    # --- capabilities over pixels ---------------------------------------------

    def caption(self, artifact: str) -> str:
        pairs = self.read_scene(artifact)
        if not pairs:
            return "The image shows a plain white background with no objects."
        listing = _join([f"a {color} {shape}" for color, shape in pairs])
        return f"The image shows {listing} on a white background."

    def probe_open(self, artifact: str, question: str) -> str:
        pairs = self.read_scene(artifact)
        target = _pair_in_text(question)
        if target is None:
            if not pairs:
                return "the image is a plain white background"
            return "the image shows " + _join([f"a {c} {s}" for c, s in pairs])
        color, shape = target
        if (color, shape) in pairs:
            return f"a {color} {shape} is clearly visible"
        if not pairs:
            return f"there is no {color} {shape}; the image is a plain white background"
        listing = _join([f"a {c} {s}" for c, s in pairs])
        return f"there is no {color} {shape}; the image shows {listing}"

    def probe_binary(self, artifact: str, question: str) -> str:
        target = _pair_in_text(question)
        if target is None:
            return "no"
        return "yes" if target in self.read_scene(artifact) else "no"

    def reward(self, prompt_text: str, artifact: str) -> float:
        requested = [(color, shape) for color, shape, _ in parse_scene(prompt_text)]
        if not requested:
            return 0.0
        present = set(self.read_scene(artifact))
        return sum(1 for pair in requested if pair in present) / len(requested)

    # --- text-only capabilities -------------------------------------------------

    def judge(self, premise: str, hypothesis: str) -> str:
        premise_tokens = re.findall(r"[a-z]+", premise.lower())
        content = [
            token
            for token in re.findall(r"[a-z]+", hypothesis.lower())
            if token not in _STOPWORDS
        ]
        if not content:
            return "neutral"
        negated = set()
        for index, token in enumerate(premise_tokens):
            if token in _NEGATIONS:
                negated.update(premise_tokens[index + 1: index + 4])
        if any(token in negated for token in content):
            return "contradiction"
        if all(token in premise_tokens for token in content):
            return "entailment"
        return "neutral"

    def decompose(self, prompt_text: str) -> list[dict]:
        elements = []
        for color, shape, _ in parse_scene(prompt_text):
            elements.append(
                {
                    "element_id": len(elements),
                    "text": f"a {color} {shape}",
                    "importance": "core",
                    "semantic_category": "object_presence",
                    "probe_question": f"what matches this description in the image: a {color} {shape}?",
                }
            )
        background = parse_background(prompt_text)
        if background:
            elements.append(
                {
                    "element_id": len(elements),
                    "text": f"a {background} background",
                    "importance": "extra",
                    "semantic_category": "property",
                    "probe_question": "what kind of background does the image have?",
                }
            )
        return elements

    def rewrite(self, instruction_id: str, payload: dict) -> str:
        parent = str(payload.get("parent_text", "")).strip()
        variant_index = int(payload.get("variant_index", 0))
        attempt = int(payload.get("attempt", 1))
        texts = {int(item["element_id"]): item["text"] for item in payload.get("elements", ())}
        tag = f" (take {variant_index + 1})" if variant_index else ""
        retag = " (retry)" if attempt > 1 else ""
        if "failure_targeted" in instruction_id or "per_sample" in instruction_id:
            failures = [texts[int(eid)] for eid in payload.get("failure_ids", ())]
            clause = _join(failures) if failures else "everything requested"
            return f"{parent} Make sure to include: {clause}.{tag}{retag}"
        if "exploration" in instruction_id:
            return f"A clean composition of: {parent} (rephrased {variant_index + 1}{retag})"
        if "standard_expansion" in instruction_id:
            return f"{parent}, rendered in crisp detail on a clean backdrop{tag}{retag}"
        raise KeyError(instruction_id)


def _join(parts: list[str]) -> str:
    if len(parts) <= 1:
        return "".join(parts)
    return ", ".join(parts[:-1]) + " and " + parts[-1]


def _pair_in_text(text: str) -> tuple[str, str] | None:
    pairs = parse_scene(text)
    return (pairs[0][0], pairs[0][1]) if pairs else None
