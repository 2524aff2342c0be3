"""Backend profiles: per-capability bindings resolved into a BackendSet."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import httpx

from ..errors import ProfileError
from ..instructions import DEFAULT_INSTRUCTIONS, instructions_fingerprint
from ..records import canonical_json
from .base import CAPABILITIES, BackendSet
from .simulated import SimulatedCapabilities, SimWorld
from .wire import (
    WireCaptioner,
    WireClient,
    WireDecomposer,
    WireGenerator,
    WireNli,
    WireProber,
    WireReward,
    WireRewriter,
)

SIMULATED = "simulated"


@dataclass(frozen=True)
class BackendProfile:
    """Capability bindings: "simulated" or an HTTP endpoint per capability."""

    bindings: dict[str, str]
    instructions: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_INSTRUCTIONS))
    sim_world: SimWorld | None = None

    def __post_init__(self) -> None:
        missing = [cap for cap in CAPABILITIES if cap not in self.bindings]
        if missing:
            raise ProfileError(f"profile leaves capabilities unbound: {missing}")
        unknown = [cap for cap in self.bindings if cap not in CAPABILITIES]
        if unknown:
            raise ProfileError(f"profile binds unknown capabilities: {unknown}")
        if self.uses_simulation and self.sim_world is None:
            raise ProfileError("simulated bindings require a sim_world section")

    @property
    def uses_simulation(self) -> bool:
        return any(binding == SIMULATED for binding in self.bindings.values())

    @property
    def fully_simulated(self) -> bool:
        return all(binding == SIMULATED for binding in self.bindings.values())

    @property
    def fingerprint(self) -> str:
        body = {
            "bindings": dict(sorted(self.bindings.items())),
            "instructions": instructions_fingerprint(tuple(self.instructions.values())),
            "sim_world": None if self.sim_world is None else self.sim_world.to_payload(),
        }
        return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()[:16]

    def to_payload(self) -> dict:
        return {
            "record": "backend_profile",
            "v": 1,
            "bindings": dict(sorted(self.bindings.items())),
            "instructions": dict(sorted(self.instructions.items())),
            "sim_world": None if self.sim_world is None else self.sim_world.to_payload(),
        }

    @classmethod
    def from_payload(cls, payload: Mapping[str, Any]) -> "BackendProfile":
        world = payload.get("sim_world")
        return cls(
            bindings=dict(payload["bindings"]),
            instructions=dict(payload.get("instructions") or DEFAULT_INSTRUCTIONS),
            sim_world=None if world is None else SimWorld.from_payload(world),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(canonical_json(self.to_payload()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BackendProfile":
        return cls.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


def simulated_profile(world: SimWorld) -> BackendProfile:
    return BackendProfile(bindings={cap: SIMULATED for cap in CAPABILITIES}, sim_world=world)


def build_backends(
    profile: BackendProfile,
    client_factory: Callable[[str], WireClient] | None = None,
    http_client: httpx.Client | None = None,
) -> BackendSet:
    """Resolve a profile into live capability objects.

    Remote capabilities sharing one endpoint share one WireClient. Pass
    ``http_client`` to route all endpoints through a custom httpx client
    (e.g. an in-process ASGI transport in tests).
    """
    sim = SimulatedCapabilities(profile.sim_world, profile.instructions) if profile.uses_simulation else None
    clients: dict[str, WireClient] = {}

    def client_for(endpoint: str) -> WireClient:
        if endpoint not in clients:
            if client_factory is not None:
                clients[endpoint] = client_factory(endpoint)
            else:
                clients[endpoint] = WireClient(endpoint, client=http_client)
        return clients[endpoint]

    ins = profile.instructions

    def resolve(capability: str):
        binding = profile.bindings[capability]
        if binding == SIMULATED:
            return sim
        client = client_for(binding)
        if capability == "generator":
            return WireGenerator(client)
        if capability == "captioner":
            return WireCaptioner(
                client, {"image": ins["caption_image"], "video": ins["caption_video"]}
            )
        if capability == "prober":
            return WireProber(
                client, {"probe_open": ins["probe_open"], "probe_binary": ins["probe_binary"]}
            )
        if capability == "nli":
            return WireNli(client, ins["nli"])
        if capability == "decomposer":
            return WireDecomposer(
                client, {"image": ins["decompose_image"], "video": ins["decompose_video"]}
            )
        if capability == "rewriter":
            return WireRewriter(client)
        if capability == "reward":
            return WireReward(client, ins["reward"])
        raise ProfileError(f"unknown capability {capability!r}")

    return BackendSet(**{cap: resolve(cap) for cap in CAPABILITIES})
