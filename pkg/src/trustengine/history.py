"""Append-only operational history (JSON Lines) with derived aggregates.

The log is the source of truth; the in-memory aggregate cache is an
optimisation that must always equal a full replay.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .algorithm import HistoryAggregate
from .errors import CorruptRecord, SequenceGap, StorageFailure
from .model import ExecutionOutcome, Mode, TrustLevel

FIELDS = ("seq", "code_id", "outcome", "mode", "score_after", "level_after")


@dataclass(frozen=True)
class ExecutionRecord:
    seq: int
    code_id: str
    outcome: ExecutionOutcome
    mode: Mode
    score_after: float
    level_after: TrustLevel

    def __post_init__(self):
        if not 0.0 <= self.score_after <= 1.0:
            raise ValueError("score_after must be in [0, 1]")

    def to_json(self) -> dict:
        return {
            "seq": self.seq,
            "code_id": self.code_id,
            "outcome": self.outcome.value,
            "mode": self.mode.value,
            "score_after": self.score_after,
            "level_after": self.level_after.label,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":")) + "\n"

    @classmethod
    def from_line(cls, line: str, line_no: int = 0) -> ExecutionRecord:
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict) or tuple(obj) != FIELDS:
                raise ValueError("unexpected keys")
            if type(obj["seq"]) is not int or not isinstance(obj["code_id"], str):
                raise ValueError("bad field types")
            if not isinstance(obj["score_after"], (int, float)) or isinstance(obj["score_after"], bool):
                raise ValueError("bad score")
            return cls(obj["seq"], obj["code_id"], ExecutionOutcome(obj["outcome"]), Mode(obj["mode"]),
                       float(obj["score_after"]), TrustLevel.from_label(obj["level_after"]))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptRecord(line_no, str(exc)) from None


def read_records(path: Path) -> Iterator[ExecutionRecord]:
    """Parse every record in *path*, raising CorruptRecord on the first bad line."""
    if not path.exists():
        return
    with open(path, "rb") as fh:
        data = fh.read()
    if not data:
        return
    lines = data.split(b"\n")
    if lines[-1] != b"":
        raise CorruptRecord(len(lines), "truncated final record")
    prev = 0
    for line_no, raw in enumerate(lines[:-1], start=1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptRecord(line_no, "not UTF-8") from None
        record = ExecutionRecord.from_line(text, line_no)
        if record.seq != prev + 1:
            raise CorruptRecord(line_no, f"sequence {record.seq} follows {prev}")
        prev = record.seq
        yield record


def fold(records: Iterable[ExecutionRecord]) -> dict[str, HistoryAggregate]:
    aggregates: dict[str, HistoryAggregate] = {}
    for record in records:
        agg = aggregates.get(record.code_id) or HistoryAggregate(record.code_id)
        aggregates[record.code_id] = agg.with_outcome(record.outcome)
    return aggregates


def replay(path: Path) -> dict[str, HistoryAggregate]:
    return fold(read_records(Path(path)))


class HistoryLog:
    """Single-writer append-only log at ``<store>/history.jsonl``."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._load()

    def _load(self) -> None:
        records = list(read_records(self.path))
        self.last_seq = records[-1].seq if records else 0
        self._cache = fold(records)
        self._last_by_code = {r.code_id: r for r in records}

    def append(self, record: ExecutionRecord) -> None:
        if record.seq != self.last_seq + 1:
            raise SequenceGap(f"expected seq {self.last_seq + 1}, got {record.seq}")
        size = self.size()
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record.to_line())
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            self._truncate(size)
            raise StorageFailure(f"history append failed: {exc}") from exc
        self.last_seq = record.seq
        agg = self._cache.get(record.code_id) or HistoryAggregate(record.code_id)
        self._cache[record.code_id] = agg.with_outcome(record.outcome)
        self._last_by_code[record.code_id] = record

    def rollback(self, size: int) -> None:
        """Drop everything past *size* bytes; only used to abort an uncommitted run."""
        self._truncate(size)
        self._load()

    def _truncate(self, size: int) -> None:
        if self.path.exists() and self.path.stat().st_size > size:
            with open(self.path, "r+b") as fh:
                fh.truncate(size)

    def size(self) -> int:
        return self.path.stat().st_size if self.path.exists() else 0

    def aggregate(self, code_id: str) -> HistoryAggregate:
        """Cached aggregate for *code_id*."""
        return self._cache.get(code_id) or HistoryAggregate(code_id)

    def aggregates(self) -> dict[str, HistoryAggregate]:
        return dict(self._cache)

    def load_aggregate(self, code_id: str) -> HistoryAggregate:
        """Aggregate for *code_id* folded directly from the log file."""
        agg = HistoryAggregate(code_id)
        for record in read_records(self.path):
            if record.code_id == code_id:
                agg = agg.with_outcome(record.outcome)
        return agg

    def replay(self) -> dict[str, HistoryAggregate]:
        return replay(self.path)

    def records(self, code_id: Optional[str] = None) -> list[ExecutionRecord]:
        return [r for r in read_records(self.path) if code_id is None or r.code_id == code_id]

    def last_record(self, code_id: str) -> Optional[ExecutionRecord]:
        return self._last_by_code.get(code_id)
