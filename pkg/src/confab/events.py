"""Append-only session event log: the substrate for replay and analytics.

One session == one JSONL file, one record per line, seq-ordered, UTF-8.
Serialization is canonical (sorted keys, compact separators) so that two
identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

SCHEMA_VERSION = 1

EVENT_KINDS = frozenset(
    {
        "session_created",
        "participant_joined",
        "partition_assigned",
        "round_started",
        "chat",
        "agent_message",
        "stance_assessed",
        "insight_registered",
        "insight_routed",
        "snapshot",
        "round_finalized",
        "session_ended",
    }
)


@dataclass(frozen=True)
class EventRecord:
    seq: int  # session-global, strictly increasing
    time_ms: int  # ms since session start
    kind: str
    payload: dict

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "seq": self.seq,
                "time_ms": self.time_ms,
                "kind": self.kind,
                "payload": self.payload,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json_line(cls, line: str) -> "EventRecord":
        doc = json.loads(line)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
        kind = doc["kind"]
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        return cls(seq=doc["seq"], time_ms=doc["time_ms"], kind=kind, payload=doc["payload"])


class EventLog:
    """In-memory append-only log enforcing seq and time monotonicity."""

    def __init__(self) -> None:
        self.records: list[EventRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def append(self, kind: str, time_ms: int, payload: dict) -> EventRecord:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if self.records and time_ms < self.records[-1].time_ms:
            raise ValueError(
                f"event time went backwards: {time_ms} < {self.records[-1].time_ms}"
            )
        rec = EventRecord(seq=len(self.records), time_ms=time_ms, kind=kind, payload=payload)
        self.records.append(rec)
        return rec

    def to_jsonl(self) -> str:
        return "".join(rec.to_json_line() + "\n" for rec in self.records)


def write_log(path: str | Path, records: Iterable[EventRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json_line() + "\n")


def read_log(path: str | Path) -> list[EventRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(EventRecord.from_json_line(line))
    for prev, cur in zip(records, records[1:]):
        if cur.seq <= prev.seq:
            raise ValueError(f"log seq not strictly increasing at {cur.seq}")
    return records


def iter_log_dir(log_dir: str | Path) -> Iterator[tuple[Path, list[EventRecord]]]:
    """Yield (path, records) for every *.jsonl session log under a directory."""
    for path in sorted(Path(log_dir).glob("*.jsonl")):
        yield path, read_log(path)
