"""Text-based wire protocol for remote model servers.

One request/response per call. Media travels by reference (URIs into a
shared artifact store), never inline. Transport errors retry with
exponential backoff (3 attempts); the request hash doubles as an
idempotency key so retried calls are safe to replay server-side.
"""

from __future__ import annotations

import hashlib
import math
import threading
import time
from typing import Any, Mapping

import httpx

from ..core import (
    Importance,
    Label,
    PromptRecord,
    SemanticCategory,
    SemanticElement,
    VisualHandle,
)
from ..errors import BackendError, EmptyCaption, EmptyDecomposition
from ..records import canonical_json
from .base import normalize_label

WIRE_VERSION = 1
CALL_PATH = "/call"


def make_request(capability: str, instruction_id: str, payload: Mapping[str, Any]) -> dict:
    return {
        "record": "wire_request",
        "v": WIRE_VERSION,
        "capability": capability,
        "instruction_id": instruction_id,
        "payload": dict(payload),
    }


def make_response(payload: Mapping[str, Any], usage: Mapping[str, Any] | None = None,
                  status: str = "ok", error: str | None = None) -> dict:
    response: dict[str, Any] = {
        "record": "wire_response",
        "v": WIRE_VERSION,
        "status": status,
        "payload": dict(payload),
        "usage": dict(usage or {}),
    }
    if error is not None:
        response["error"] = error
    return response


def request_hash(request: Mapping[str, Any]) -> str:
    return hashlib.sha256(canonical_json(dict(request)).encode("utf-8")).hexdigest()


class WireClient:
    """Single-endpoint protocol client with retry, idempotency keys, and a
    per-endpoint cap on concurrent in-flight calls."""

    def __init__(
        self,
        endpoint: str,
        client: httpx.Client | None = None,
        max_attempts: int = 3,
        backoff_seconds: float = 0.2,
        timeout: float = 60.0,
        max_concurrency: int = 8,
    ):
        self.endpoint = endpoint.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout)
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self._in_flight = threading.BoundedSemaphore(max_concurrency)

    def call(self, capability: str, instruction_id: str, payload: Mapping[str, Any]) -> dict:
        request = make_request(capability, instruction_id, payload)
        body = canonical_json(request).encode("utf-8")
        headers = {
            "content-type": "application/json",
            "idempotency-key": request_hash(request),
        }
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt and self.backoff_seconds:
                time.sleep(self.backoff_seconds * (2 ** (attempt - 1)))
            try:
                with self._in_flight:
                    raw = self._client.post(
                        self.endpoint + CALL_PATH, content=body, headers=headers
                    )
            except httpx.TimeoutException as exc:
                last_error = exc
                continue
            except httpx.TransportError as exc:
                last_error = exc
                continue
            return self._parse(capability, raw)
        raise BackendError(
            f"transport failed after {self.max_attempts} attempts: {last_error}",
            capability=capability,
            cause="timeout" if isinstance(last_error, httpx.TimeoutException) else "transport",
        )

    def _parse(self, capability: str, raw: httpx.Response) -> dict:
        if raw.status_code != 200:
            raise BackendError(
                f"endpoint returned HTTP {raw.status_code}",
                capability=capability,
                cause="remote_failure",
            )
        try:
            data = raw.json()
        except ValueError as exc:
            raise BackendError(
                f"response is not valid JSON: {exc}", capability=capability, cause="malformed"
            ) from exc
        if not isinstance(data, dict) or data.get("record") != "wire_response":
            raise BackendError(
                "response is not a wire_response record", capability=capability, cause="malformed"
            )
        if data.get("status") != "ok":
            raise BackendError(
                f"remote failure: {data.get('error', 'unspecified')}",
                capability=capability,
                cause="remote_failure",
            )
        payload = data.get("payload")
        if not isinstance(payload, dict):
            raise BackendError(
                "wire_response payload missing", capability=capability, cause="malformed"
            )
        return payload


def _require(payload: Mapping[str, Any], key: str, capability: str) -> Any:
    if key not in payload:
        raise BackendError(
            f"response payload missing {key!r}", capability=capability, cause="malformed"
        )
    return payload[key]


class WireGenerator:
    def __init__(self, client: WireClient, instruction_id: str = ""):
        self.client = client
        self.instruction_id = instruction_id
        self.fingerprint = f"wire/generator@{client.endpoint}"

    def generate(
        self,
        prompt: PromptRecord,
        seed: int,
        steps: int,
        cfg_enabled: bool,
        sampler_options: Mapping[str, Any] | None = None,
    ) -> VisualHandle:
        payload = self.client.call(
            "generator",
            self.instruction_id,
            {
                "prompt_id": prompt.prompt_id,
                "prompt_text": prompt.text,
                "seed": seed,
                "steps": steps,
                "cfg": cfg_enabled,
                "sampler_options": dict(sampler_options or {}),
            },
        )
        return VisualHandle(
            media_kind=_require(payload, "media_kind", "generator"),
            frame_count=payload.get("frame_count", 1),
            uri=_require(payload, "visual_uri", "generator"),
        )


class WireCaptioner:
    def __init__(self, client: WireClient, instruction_ids: Mapping[str, str]):
        self.client = client
        self.instruction_ids = dict(instruction_ids)  # media_kind -> instruction id
        self.fingerprint = f"wire/captioner@{client.endpoint}"

    def caption(self, visual: VisualHandle) -> str:
        payload = self.client.call(
            "captioner",
            self.instruction_ids[visual.media_kind],
            {
                "visual_uri": visual.uri,
                "media_kind": visual.media_kind,
                "frame_count": visual.frame_count,
            },
        )
        text = _require(payload, "caption", "captioner")
        if not text:
            raise EmptyCaption("captioner returned an empty caption", capability="captioner")
        return text


class WireProber:
    def __init__(self, client: WireClient, instructions: Mapping[str, str] | None = None):
        self.client = client
        self.instructions = dict(instructions or {})  # role -> instruction id
        self.fingerprint = f"wire/prober@{client.endpoint}"

    def probe(self, visual: VisualHandle, question: str, instruction_id: str) -> str:
        payload = self.client.call(
            "prober",
            instruction_id,
            {
                "visual_uri": visual.uri,
                "media_kind": visual.media_kind,
                "question": question,
            },
        )
        return _require(payload, "answer", "prober")


class WireNli:
    def __init__(self, client: WireClient, instruction_id: str):
        self.client = client
        self.instruction_id = instruction_id
        self.fingerprint = f"wire/nli@{client.endpoint}"

    def judge(self, premise: str, hypothesis: str) -> Label:
        payload = self.client.call(
            "nli", self.instruction_id, {"premise": premise, "hypothesis": hypothesis}
        )
        return normalize_label(str(_require(payload, "label", "nli")))


class WireDecomposer:
    def __init__(self, client: WireClient, instruction_ids: Mapping[str, str]):
        self.client = client
        self.instruction_ids = dict(instruction_ids)  # media_kind -> instruction id
        self.fingerprint = f"wire/decomposer@{client.endpoint}"

    def decompose(self, prompt: PromptRecord, media_kind: str) -> list[SemanticElement]:
        payload = self.client.call(
            "decomposer",
            self.instruction_ids[media_kind],
            {
                "prompt_id": prompt.prompt_id,
                "prompt_text": prompt.text,
                "media_kind": media_kind,
            },
        )
        raw_elements = _require(payload, "elements", "decomposer")
        if not raw_elements:
            raise EmptyDecomposition("decomposer returned zero elements", capability="decomposer")
        elements = []
        for item in raw_elements:
            elements.append(
                SemanticElement(
                    element_id=item["element_id"],
                    text=item["text"],
                    importance=Importance(item["importance"]),
                    semantic_category=SemanticCategory(item.get("semantic_category", "other")),
                    probe_question=item.get("probe_question"),
                )
            )
        return elements


class WireRewriter:
    def __init__(self, client: WireClient):
        self.client = client
        self.fingerprint = f"wire/rewriter@{client.endpoint}"

    def rewrite(self, instruction_id: str, payload: Mapping[str, Any]) -> str:
        response = self.client.call("rewriter", instruction_id, payload)
        return str(_require(response, "text", "rewriter"))


class WireReward:
    def __init__(self, client: WireClient, instruction_id: str):
        self.client = client
        self.instruction_id = instruction_id
        self.fingerprint = f"wire/reward@{client.endpoint}"

    def score(self, original_prompt: PromptRecord, visual: VisualHandle) -> float:
        payload = self.client.call(
            "reward",
            self.instruction_id,
            {
                "prompt_text": original_prompt.text,
                "visual_uri": visual.uri,
                "media_kind": visual.media_kind,
            },
        )
        value = float(_require(payload, "score", "reward"))
        if math.isnan(value) or math.isinf(value):
            raise BackendError(
                f"reward endpoint returned non-finite score {value!r}",
                capability="reward",
                cause="malformed",
            )
        return value
