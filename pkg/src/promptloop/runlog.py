"""Append-only, hash-chained run event log and the run directory layout.

Every event is one canonical record line carrying a sequence number, the
previous entry's hash, and its own hash over the canonical encoding. The
chain makes corruption and tampering detectable and is what replay compares
byte for byte. Wall-clock timings never enter the log (they cannot replay);
they live in a sidecar file.

Run directory layout:
    config.json     run configuration + prompt + backend profile
    events.log      hash-chained canonical event records
    artifacts.json  artifact-store index
    timings.json    wall-clock sidecar (not replay-checked)
    summary.json    machine-readable report (written by `report`)
    report.md       human-readable report (written by `report`)
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterator

from .errors import CorruptLog
from .records import canonical_json

GENESIS = "0" * 64

CONFIG_FILE = "config.json"
EVENTS_FILE = "events.log"
ARTIFACTS_FILE = "artifacts.json"
TIMINGS_FILE = "timings.json"
SUMMARY_FILE = "summary.json"
REPORT_FILE = "report.md"


def _entry_hash(seq: int, prev: str, event_type: str, payload: dict) -> str:
    body = canonical_json(
        {"seq": seq, "prev": prev, "type": event_type, "payload": payload}
    )
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


class EventLog:
    """Single-writer append-only log. With no path it accumulates in memory."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.entries: list[dict] = []
        self._prev = GENESIS
        self._fh = None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "w", encoding="utf-8")

    def append(self, event_type: str, payload: dict) -> dict:
        entry = {
            "record": "event",
            "v": 1,
            "seq": len(self.entries),
            "prev": self._prev,
            "type": event_type,
            "payload": payload,
        }
        entry["hash"] = _entry_hash(entry["seq"], entry["prev"], event_type, payload)
        self._prev = entry["hash"]
        self.entries.append(entry)
        if self._fh is not None:
            self._fh.write(canonical_json(entry) + "\n")
            self._fh.flush()
        return entry

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_events(path: str | Path) -> list[dict]:
    """Load and verify a hash-chained event log."""
    entries: list[dict] = []
    prev = GENESIS
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except ValueError as exc:
                raise CorruptLog(f"line {lineno} is not valid JSON: {exc}") from exc
            if entry.get("record") != "event":
                raise CorruptLog(f"line {lineno} is not an event record")
            expected = _entry_hash(entry["seq"], entry["prev"], entry["type"], entry["payload"])
            if entry.get("hash") != expected or entry.get("prev") != prev:
                raise CorruptLog(f"hash chain breaks at seq {entry.get('seq')}")
            if entry["seq"] != len(entries):
                raise CorruptLog(f"sequence gap at seq {entry.get('seq')}")
            prev = entry["hash"]
            entries.append(entry)
    return entries


def events_of_type(entries: list[dict], event_type: str) -> Iterator[dict]:
    return (entry["payload"] for entry in entries if entry["type"] == event_type)


class RunDir:
    """Accessor for one run's on-disk layout."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def create(self) -> "RunDir":
        self.path.mkdir(parents=True, exist_ok=True)
        return self

    @property
    def config_path(self) -> Path:
        return self.path / CONFIG_FILE

    @property
    def events_path(self) -> Path:
        return self.path / EVENTS_FILE

    @property
    def artifacts_path(self) -> Path:
        return self.path / ARTIFACTS_FILE

    @property
    def timings_path(self) -> Path:
        return self.path / TIMINGS_FILE

    @property
    def summary_path(self) -> Path:
        return self.path / SUMMARY_FILE

    @property
    def report_path(self) -> Path:
        return self.path / REPORT_FILE

    def write_config(self, payload: dict) -> None:
        self.config_path.write_text(canonical_json(payload) + "\n", encoding="utf-8")

    def read_config(self) -> dict:
        return json.loads(self.config_path.read_text(encoding="utf-8"))

    def write_artifacts(self, index: dict[str, Any]) -> None:
        self.artifacts_path.write_text(canonical_json(index) + "\n", encoding="utf-8")

    def write_timings(self, timings: dict[str, Any]) -> None:
        self.timings_path.write_text(
            json.dumps(timings, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    def events(self) -> list[dict]:
        return read_events(self.events_path)
