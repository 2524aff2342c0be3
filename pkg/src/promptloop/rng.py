"""Counter-based keyed randomness.

Every random draw in the engine is a pure function of a structured key, so
concurrent or reordered jobs cannot change outcomes and replays are exact on
any platform. Keys are sequences of ints/strings/bytes; each part is length-
and type-tagged before hashing to rule out concatenation collisions.
"""

from __future__ import annotations

import hashlib

_U64_MASK = (1 << 64) - 1
_UNIT_DENOM = float(1 << 53)

KeyPart = int | str | bytes


def _encode(parts: tuple[KeyPart, ...]) -> bytes:
    buf = bytearray()
    for part in parts:
        if isinstance(part, bool):  # bool is an int subclass; keep tags distinct
            raw, tag = (b"\x01" if part else b"\x00"), b"b"
        elif isinstance(part, int):
            raw, tag = str(part).encode("ascii"), b"i"
        elif isinstance(part, str):
            raw, tag = part.encode("utf-8"), b"s"
        else:
            raw, tag = part, b"y"
        buf += tag + len(raw).to_bytes(4, "big") + raw
    return bytes(buf)


def hash_u64(*parts: KeyPart) -> int:
    """Uniform 64-bit integer for the given key."""
    digest = hashlib.blake2b(_encode(parts), digest_size=8).digest()
    return int.from_bytes(digest, "big") & _U64_MASK


def hash_unit(*parts: KeyPart) -> float:
    """Uniform float in [0, 1) for the given key (53-bit resolution)."""
    return (hash_u64(*parts) >> 11) / _UNIT_DENOM


def hash_hex(*parts: KeyPart) -> str:
    """16-hex-digit stable identifier for the given key."""
    return hashlib.blake2b(_encode(parts), digest_size=8).hexdigest()
