"""Append-only run log: one JSON record per line, events and messages mixed
in emission order. The log is the single source for metrics and replay."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import MalformedLog


def canonical(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class EventLog:
    def __init__(self):
        self.records: list[dict] = []
        self._message_seq = 0

    def event(self, type_: str, tick: int, time: float, **fields) -> dict:
        rec = {"kind": "event", "type": type_, "tick": tick,
               "time": round(time, 9), **fields}
        self.records.append(rec)
        return rec

    def message(self, msg, tick: int, time: float) -> dict:
        rec = {"kind": "message", "type": msg.type_name,
               "seq": self._message_seq, "sender": msg.sender.value,
               "tick": tick, "time": round(time, 9),
               "payload": msg.payload()}
        self._message_seq += 1
        self.records.append(rec)
        return rec

    def messages(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "message"]

    def digest(self) -> str:
        h = hashlib.sha256()
        for rec in self.records:
            h.update(canonical(rec).encode())
            h.update(b"\n")
        return h.hexdigest()

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for rec in self.records:
                f.write(canonical(rec) + "\n")


def read_log(path) -> list[dict]:
    """Parse a JSONL event log; structurally validates framing."""
    text = Path(path).read_text(encoding="utf-8")
    records = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            raise MalformedLog(f"line {i + 1} is not valid JSON") from None
    validate_log(records)
    return records


def validate_log(records: list[dict]) -> None:
    if not records:
        raise MalformedLog("log is empty")
    first, last = records[0], records[-1]
    if first.get("kind") != "event" or first.get("type") != "run_start":
        raise MalformedLog("log does not start with a run_start event")
    if last.get("kind") != "event" or last.get("type") != "run_end":
        raise MalformedLog("log is truncated (no run_end event)")


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
