from .base import CAPABILITIES, BackendSet, normalize_label
from .profile import BackendProfile, build_backends, simulated_profile
from .simulated import SimElementSpec, SimulatedCapabilities, SimWorld, strip_emphasis
from .wire import WireClient, make_request, make_response, request_hash

__all__ = [
    "CAPABILITIES",
    "BackendSet",
    "BackendProfile",
    "SimElementSpec",
    "SimWorld",
    "SimulatedCapabilities",
    "WireClient",
    "build_backends",
    "make_request",
    "make_response",
    "normalize_label",
    "request_hash",
    "simulated_profile",
    "strip_emphasis",
]
