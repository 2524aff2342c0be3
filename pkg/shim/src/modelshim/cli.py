"""Serve the shim: `modelshim --artifact-dir DIR [--instruction-dir DIR]`."""

from __future__ import annotations

import argparse
from pathlib import Path

import uvicorn

from .config import ShimConfig, default_instruction_dir
from .server import create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelshim")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8018)
    parser.add_argument("--artifact-dir", required=True, help="shared artifact store mount")
    parser.add_argument(
        "--instruction-dir",
        default=None,
        help="the engine's versioned instruction directory (auto-discovered when omitted)",
    )
    parser.add_argument("--image-size", type=int, default=96)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    instruction_dir = (
        Path(args.instruction_dir) if args.instruction_dir else default_instruction_dir()
    )
    config = ShimConfig(
        artifact_dir=Path(args.artifact_dir),
        instruction_dir=instruction_dir,
        image_size=args.image_size,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
