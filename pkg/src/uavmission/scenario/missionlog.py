"""Append-only mission event log, stored as JSON lines."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

TERMINAL = ("mission-complete", "mission-failed")


class LogError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    tick: int
    kind: str
    payload: Any

    def to_json(self) -> str:
        return json.dumps({"tick": self.tick, "kind": self.kind, "payload": self.payload},
                          sort_keys=True, separators=(",", ":"))


class MissionLog:
    def __init__(self, records: list[Record] | None = None):
        self.records: list[Record] = []
        for r in records or ():
            self.append(r.tick, r.kind, r.payload)

    def append(self, tick: int, kind: str, payload: Any = None) -> Record:
        if self.closed:
            raise LogError("log is closed")
        if self.records and tick < self.records[-1].tick:
            raise LogError(f"tick {tick} precedes {self.records[-1].tick}")
        # round-trip through JSON so the in-memory log equals what is written out
        rec = Record(int(tick), kind, json.loads(json.dumps(payload)))
        self.records.append(rec)
        return rec

    @property
    def closed(self) -> bool:
        return bool(self.records) and self.records[-1].kind in TERMINAL

    def of(self, kind: str) -> Iterator[Record]:
        return (r for r in self.records if r.kind == kind)

    def first(self, kind: str) -> Record | None:
        return next(self.of(kind), None)

    def envelopes(self, service: str | None = None, kind: str | None = None) -> list[dict]:
        out = []
        for r in self.of("bus"):
            env = r.payload
            if (service is None or env["service"] == service) and (kind is None or env["kind"] == kind):
                out.append(env)
        return out

    def dumps(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "MissionLog":
        log = cls()
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                log.append(d["tick"], d["kind"], d.get("payload"))
            except (json.JSONDecodeError, KeyError) as exc:
                raise LogError(f"line {n}: {exc}") from None
        return log

    @classmethod
    def read(cls, path: str | Path) -> "MissionLog":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
