"""State management registry for simulated processes.

Tracks begin/fork/complete/abort events and audits a process tree for
execution that did not run from start to finish.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .errors import AlreadyTerminal, ParentNotRunning, UnknownParent, UnknownPid


class Status(enum.Enum):
    STARTED = "started"
    COMPLETED = "completed"
    ABORTED = "aborted"


@dataclass
class ProcessEntry:
    pid: int
    code_id: str
    parent_pid: Optional[int]
    status: Status = Status.STARTED
    detail: Optional[str] = None  # exit status when completed, reason when aborted
    children: list[int] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return self.status is not Status.STARTED


class ViolationKind(enum.IntEnum):
    # value orders reasons that share a pid
    INCOMPLETE_ROOT = 0
    ORPHAN_CHILD = 1
    DANGLING_CHILD = 2


@dataclass(frozen=True, order=True)
class StateViolationReason:
    pid: int
    kind: ViolationKind

    def __str__(self) -> str:
        name = "".join(part.capitalize() for part in self.kind.name.split("_"))
        return name if self.kind is ViolationKind.INCOMPLETE_ROOT else f"{name}({self.pid})"


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: str  # BEGIN | COMPLETE | ABORT
    pid: int
    parent: Optional[int]
    code_id: str
    status: Optional[str] = None

    def __str__(self) -> str:
        parent = "-" if self.parent is None else str(self.parent)
        line = f"EVT {self.seq} {self.kind} pid={self.pid} parent={parent} code={self.code_id}"
        return line if self.status is None else f"{line} status={self.status}"


class StateRegistry:
    """Per-run process table. pids start at 1 and increase monotonically."""

    def __init__(self):
        self.entries: dict[int, ProcessEntry] = {}
        self.events: list[TraceEvent] = []
        self._next_pid = 1

    def _emit(self, kind: str, entry: ProcessEntry, status: Optional[str] = None) -> None:
        self.events.append(TraceEvent(len(self.events) + 1, kind, entry.pid, entry.parent_pid,
                                      entry.code_id, status))

    def _get(self, pid: int) -> ProcessEntry:
        try:
            return self.entries[pid]
        except KeyError:
            raise UnknownPid(pid) from None

    def begin_process(self, code_id: str, parent_pid: Optional[int] = None) -> int:
        if parent_pid is not None:
            parent = self.entries.get(parent_pid)
            if parent is None:
                raise UnknownParent(parent_pid)
            if parent.terminal:
                raise ParentNotRunning(parent_pid)
        pid = self._next_pid
        self._next_pid += 1
        entry = ProcessEntry(pid, code_id, parent_pid)
        self.entries[pid] = entry
        if parent_pid is not None:
            self.entries[parent_pid].children.append(pid)
        self._emit("BEGIN", entry)
        return pid

    def complete_process(self, pid: int, status: str = "success") -> ProcessEntry:
        if status not in ("success", "failure"):
            raise ValueError(f"exit status must be success or failure, got {status!r}")
        entry = self._get(pid)
        if entry.terminal:
            raise AlreadyTerminal(pid)
        entry.status = Status.COMPLETED
        entry.detail = status
        self._emit("COMPLETE", entry, status)
        return entry

    def abort_process(self, pid: int, reason: str) -> ProcessEntry:
        entry = self._get(pid)
        if entry.terminal:
            raise AlreadyTerminal(pid)
        entry.status = Status.ABORTED
        entry.detail = reason
        self._emit("ABORT", entry, reason)
        return entry

    def ancestors(self, pid: int) -> list[int]:
        """pid followed by its ancestors, innermost first."""
        chain = []
        current: Optional[int] = pid
        while current is not None:
            chain.append(current)
            current = self._get(current).parent_pid
        return chain

    def audit(self, root_pid: int) -> list[StateViolationReason]:
        return audit(self.entries, root_pid)

    def trace_lines(self) -> list[str]:
        return [str(event) for event in self.events]


def audit(entries: dict[int, ProcessEntry], root_pid: int) -> list[StateViolationReason]:
    """Reasons the tree under *root_pid* did not complete cleanly.

    Empty iff the root and every transitive child are Completed. A Started
    child under an Aborted parent is reported both as orphan and dangling.
    """
    if root_pid not in entries:
        raise UnknownPid(root_pid)
    reasons: set[StateViolationReason] = set()
    root = entries[root_pid]
    if root.status is not Status.COMPLETED:
        reasons.add(StateViolationReason(root_pid, ViolationKind.INCOMPLETE_ROOT))
    stack = list(root.children)
    while stack:
        pid = stack.pop()
        entry = entries[pid]
        if entry.status is not Status.COMPLETED:
            reasons.add(StateViolationReason(pid, ViolationKind.DANGLING_CHILD))
        if entry.status is Status.STARTED and entries[entry.parent_pid].status is Status.ABORTED:
            reasons.add(StateViolationReason(pid, ViolationKind.ORPHAN_CHILD))
        stack.extend(entry.children)
    return sorted(reasons)
