from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from modelshim.config import ShimConfig, default_instruction_dir
from modelshim.server import create_app


def post_call(client: TestClient, capability: str, instruction_id: str, payload: dict):
    body = {
        "record": "wire_request",
        "v": 1,
        "capability": capability,
        "instruction_id": instruction_id,
        "payload": payload,
    }
    return client.post("/call", content=json.dumps(body))


def test_health_advertises_capabilities_and_instructions(app):
    client = TestClient(app)
    health = client.get("/health").json()
    assert health["status"] == "ok"
    assert set(health["capabilities"]) == {
        "generator", "captioner", "prober", "nli", "decomposer", "rewriter", "reward",
    }
    assert "nli.v1" in health["instructions"]
    assert health["determinism"] is True
    assert health["frame_sampling"] == "uniform"


def test_unserved_capability_excluded_from_health_and_refused(tmp_path):
    config = ShimConfig(
        artifact_dir=tmp_path / "store",
        instruction_dir=default_instruction_dir(),
        models={"generator": "hosted/some-diffusion-model"},  # not loadable here
    )
    client = TestClient(create_app(config))
    health = client.get("/health").json()
    assert "generator" not in health["capabilities"]
    response = post_call(client, "generator", "", {"prompt_text": "x", "seed": 1})
    assert response.status_code == 200
    assert response.json()["status"] == "error"


def test_nli_call_roundtrip(app):
    client = TestClient(app)
    response = post_call(
        client, "nli", "nli.v1",
        {"premise": "The image shows a red circle.", "hypothesis": "a red circle"},
    )
    body = response.json()
    assert body["status"] == "ok"
    assert body["payload"]["label"] == "entailment"
    assert body["usage"]["model"] == "toy-lexical-nli-v1"


def test_generate_then_caption_roundtrip(app):
    client = TestClient(app)
    generated = post_call(
        client, "generator", "",
        {"prompt_text": "a red circle. Make sure to include: a red circle.",
         "seed": 3, "steps": 8, "cfg": True},
    ).json()
    assert generated["status"] == "ok"
    uri = generated["payload"]["visual_uri"]
    caption = post_call(
        client, "captioner", "caption_image.v1",
        {"visual_uri": uri, "media_kind": "image", "frame_count": 1},
    ).json()
    assert caption["status"] == "ok"
    assert caption["payload"]["caption"]


def test_error_paths(app):
    client = TestClient(app)
    assert client.post("/call", content=b"not json").status_code == 400
    response = client.post("/call", content=json.dumps({"record": "wrong"}))
    assert response.json()["status"] == "error"
    unknown = post_call(app and client, "telepathy", "", {})
    assert unknown.json()["status"] == "error"
    bad_instruction = post_call(client, "nli", "nli.v99", {"premise": "p", "hypothesis": "h"})
    assert "unknown instruction" in bad_instruction.json()["error"]
    missing_artifact = post_call(
        client, "captioner", "caption_image.v1",
        {"visual_uri": "store://missing.png", "media_kind": "image", "frame_count": 1},
    )
    assert missing_artifact.json()["status"] == "error"
    video = post_call(
        client, "captioner", "caption_video.v1",
        {"visual_uri": "store://missing.mp4", "media_kind": "video", "frame_count": 81},
    )
    assert video.json()["status"] == "error"


def test_responses_are_canonical_json(app):
    client = TestClient(app)
    raw = post_call(
        client, "nli", "nli.v1", {"premise": "p text", "hypothesis": "h text"}
    ).content
    parsed = json.loads(raw)
    assert raw == json.dumps(parsed, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def test_serve_over_real_socket(tmp_path):
    # end-to-end over TCP: uvicorn thread + plain httpx
    import threading
    import time

    import httpx
    import uvicorn

    config = ShimConfig(artifact_dir=tmp_path / "store", instruction_dir=default_instruction_dir())
    app = create_app(config)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    try:
        deadline = time.time() + 10
        while not server.started:
            if time.time() > deadline:
                pytest.fail("uvicorn did not start in time")
            time.sleep(0.05)
        port = server.servers[0].sockets[0].getsockname()[1]
        health = httpx.get(f"http://127.0.0.1:{port}/health", timeout=5.0).json()
        assert health["status"] == "ok"
    finally:
        server.should_exit = True
        thread.join(timeout=10)
