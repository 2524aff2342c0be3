"""FastAPI server speaking the engine's wire protocol.

One POST /call endpoint dispatches on the request's capability; GET /health
advertises served capabilities and instruction versions. Responses are
canonical JSON (sorted keys, compact separators) so conformance can be
checked byte for byte. Generation is deterministic per (prompt, seed,
steps, cfg) and the health record says so.
"""

from __future__ import annotations

import json
import math
from typing import Any

from fastapi import FastAPI, Request, Response

from .config import ShimConfig
from .toy import ToyModels

WIRE_VERSION = 1
STORE_PREFIX = "store://"


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _response(payload: dict, usage: dict | None = None, status: str = "ok",
              error: str | None = None) -> dict:
    body: dict[str, Any] = {
        "record": "wire_response",
        "v": WIRE_VERSION,
        "status": status,
        "payload": payload,
        "usage": usage or {},
    }
    if error is not None:
        body["error"] = error
    return body


class CallError(Exception):
    def __init__(self, message: str):
        self.message = message
        super().__init__(message)


class ShimService:
    def __init__(self, config: ShimConfig):
        self.config = config
        self.toy = ToyModels(artifact_dir=config.artifact_dir, image_size=config.image_size)

    # --- dispatch -----------------------------------------------------------

    def call(self, request: dict) -> dict:
        if not isinstance(request, dict) or request.get("record") != "wire_request":
            raise CallError("body is not a wire_request record")
        capability = request.get("capability")
        if capability not in self.config.served_capabilities():
            raise CallError(f"capability {capability!r} is not served")
        instruction_id = request.get("instruction_id", "")
        if instruction_id and instruction_id not in self.config.available_instructions():
            raise CallError(f"unknown instruction {instruction_id!r}")
        payload = request.get("payload")
        if not isinstance(payload, dict):
            raise CallError("wire_request payload missing")
        handler = getattr(self, f"_call_{capability}")
        return handler(instruction_id, payload)

    def _model(self, capability: str) -> str:
        return self.config.models[capability]

    def _artifact(self, payload: dict) -> str:
        uri = str(payload.get("visual_uri", ""))
        if not uri.startswith(STORE_PREFIX):
            raise CallError(f"visual reference must be a {STORE_PREFIX} uri")
        name = uri[len(STORE_PREFIX):]
        if not (self.config.artifact_dir / name).is_file():
            raise CallError(f"artifact {name!r} not found in store")
        return name

    # --- capabilities ----------------------------------------------------------

    def _call_generator(self, instruction_id: str, payload: dict) -> dict:
        prompt_text = str(payload["prompt_text"])
        seed = int(payload["seed"])
        steps = int(payload.get("steps", 1))
        cfg = bool(payload.get("cfg", False))
        name = self.toy.generate(prompt_text, seed, steps, cfg)
        return _response(
            {
                "visual_uri": STORE_PREFIX + name,
                "media_kind": "image",
                "frame_count": 1,
                "determinism": True,
            },
            usage={"model": self._model("generator")},
        )

    def _call_captioner(self, instruction_id: str, payload: dict) -> dict:
        if payload.get("media_kind") == "video":
            raise CallError("the toy captioner serves images only")
        caption = self.toy.caption(self._artifact(payload))
        return _response(
            {"caption": caption},
            usage={"model": self._model("captioner"),
                   "frame_sampling": self.config.frame_sampling},
        )

    def _call_prober(self, instruction_id: str, payload: dict) -> dict:
        artifact = self._artifact(payload)
        question = str(payload["question"])
        if "binary" in instruction_id:
            answer = self.toy.probe_binary(artifact, question)
        else:
            answer = self.toy.probe_open(artifact, question)
        return _response({"answer": answer}, usage={"model": self._model("prober")})

    def _call_nli(self, instruction_id: str, payload: dict) -> dict:
        label = self.toy.judge(str(payload["premise"]), str(payload["hypothesis"]))
        return _response({"label": label}, usage={"model": self._model("nli")})

    def _call_decomposer(self, instruction_id: str, payload: dict) -> dict:
        if payload.get("media_kind") == "video":
            raise CallError("the toy decomposer serves image prompts only")
        elements = self.toy.decompose(str(payload["prompt_text"]))
        return _response({"elements": elements}, usage={"model": self._model("decomposer")})

    def _call_rewriter(self, instruction_id: str, payload: dict) -> dict:
        try:
            text = self.toy.rewrite(instruction_id, payload)
        except KeyError as exc:
            raise CallError(f"no rewrite template for {exc}") from exc
        return _response({"text": text}, usage={"model": self._model("rewriter")})

    def _call_reward(self, instruction_id: str, payload: dict) -> dict:
        score = self.toy.reward(str(payload["prompt_text"]), self._artifact(payload))
        if math.isnan(score) or math.isinf(score):
            raise CallError("reward model produced a non-finite score")
        return _response({"score": score}, usage={"model": self._model("reward")})


def create_app(config: ShimConfig) -> FastAPI:
    service = ShimService(config)
    app = FastAPI(title="modelshim", version="0.1.0")
    app.state.service = service

    @app.post("/call")
    async def call(request: Request) -> Response:
        try:
            body = json.loads(await request.body())
        except ValueError:
            return _canonical(_response({}, status="error", error="body is not JSON"), 400)
        try:
            return _canonical(service.call(body))
        except CallError as exc:
            return _canonical(_response({}, status="error", error=exc.message))
        except Exception as exc:  # surfaced as a remote failure, not a 500
            return _canonical(_response({}, status="error", error=f"internal: {exc}"))

    @app.get("/health")
    async def health() -> Response:
        return _canonical(
            {
                "record": "shim_health",
                "v": 1,
                "status": "ok",
                "capabilities": service.config.served_capabilities(),
                "models": {
                    capability: service.config.models[capability]
                    for capability in service.config.served_capabilities()
                },
                "instructions": service.config.available_instructions(),
                "determinism": True,
                "frame_sampling": service.config.frame_sampling,
                "device": service.config.device,
                "precision": service.config.precision,
            }
        )

    return app


def _canonical(body: dict, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(body),
        media_type="application/json",
        status_code=status_code,
    )
