"""Simulated CPU: parses workload scripts and interprets them under a
trust-level access matrix, driving the state registry.

Workload grammar, one instruction per line, ``#`` starts a comment::

    COMPUTE <cost>
    READ <class> <name>
    WRITE <class> <name>
    FORK <code_id>
    RAISE_HANDLED
    RAISE_UNHANDLED
    EXIT success|failure

``<class>`` is one of ``system``, ``protected_user``, ``user``, ``sandbox``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .errors import ForkTargetUnknown, ParseError
from .model import CodeUnit, ExecutionOutcome, ResourceClass, TrustLevel, dominant_outcome
from .registry import StateRegistry, StateViolationReason, TraceEvent

MAX_FORK_DEPTH = 16


class AccessOp(enum.Enum):
    READ = "read"
    WRITE = "write"


@dataclass(frozen=True)
class Instruction:
    op: str
    cost: int = 0
    resource: Optional[ResourceClass] = None
    name: Optional[str] = None
    target: Optional[str] = None
    status: Optional[str] = None
    line_no: int = field(default=0, compare=False)

    @classmethod
    def compute(cls, cost: int) -> Instruction:
        return cls("COMPUTE", cost=cost)

    @classmethod
    def read(cls, resource: ResourceClass, name: str) -> Instruction:
        return cls("READ", resource=resource, name=name)

    @classmethod
    def write(cls, resource: ResourceClass, name: str) -> Instruction:
        return cls("WRITE", resource=resource, name=name)

    @classmethod
    def fork(cls, target: str) -> Instruction:
        return cls("FORK", target=target)

    @classmethod
    def exit(cls, status: str = "success") -> Instruction:
        return cls("EXIT", status=status)

    def __str__(self) -> str:
        if self.op == "COMPUTE":
            return f"COMPUTE {self.cost}"
        if self.op in ("READ", "WRITE"):
            return f"{self.op} {self.resource.value} {self.name}"
        if self.op == "FORK":
            return f"FORK {self.target}"
        if self.op == "EXIT":
            return f"EXIT {self.status}"
        return self.op


RAISE_HANDLED = Instruction("RAISE_HANDLED")
RAISE_UNHANDLED = Instruction("RAISE_UNHANDLED")

_ARITY = {"COMPUTE": 1, "READ": 2, "WRITE": 2, "FORK": 1, "RAISE_HANDLED": 0,
          "RAISE_UNHANDLED": 0, "EXIT": 1}


def _parse_line(tokens: list[str], line_no: int) -> Instruction:
    op, args = tokens[0], tokens[1:]
    if op not in _ARITY:
        raise ParseError(line_no, f"unknown opcode {op!r}")
    if len(args) != _ARITY[op]:
        raise ParseError(line_no, f"{op} takes {_ARITY[op]} argument(s), got {len(args)}")
    if op == "COMPUTE":
        try:
            cost = int(args[0])
        except ValueError:
            cost = 0
        if cost < 1:
            raise ParseError(line_no, f"COMPUTE cost must be a positive integer, got {args[0]!r}")
        return Instruction(op, cost=cost, line_no=line_no)
    if op in ("READ", "WRITE"):
        try:
            resource = ResourceClass(args[0])
        except ValueError:
            raise ParseError(line_no, f"unknown resource class {args[0]!r}") from None
        return Instruction(op, resource=resource, name=args[1], line_no=line_no)
    if op == "FORK":
        return Instruction(op, target=args[0], line_no=line_no)
    if op == "EXIT":
        if args[0] not in ("success", "failure"):
            raise ParseError(line_no, f"EXIT status must be success or failure, got {args[0]!r}")
        return Instruction(op, status=args[0], line_no=line_no)
    return Instruction(op, line_no=line_no)


def parse_workload(body: bytes) -> list[Instruction]:
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(1, f"workload is not UTF-8: {exc}") from None
    instructions = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            instructions.append(_parse_line(tokens, line_no))
    return instructions


def render_workload(instructions: Iterable[Instruction]) -> bytes:
    return "".join(f"{ins}\n" for ins in instructions).encode("utf-8")


def operation_count(instructions: Iterable[Instruction]) -> int:
    """Operations in a workload: COMPUTE counts its cost, everything else one."""
    return sum(ins.cost if ins.op == "COMPUTE" else 1 for ins in instructions)


_RW = (AccessOp.READ, AccessOp.WRITE)
_DEFAULT_GRANTS = {
    TrustLevel.OPERATIONAL: {rc: _RW for rc in ResourceClass},
    TrustLevel.TRANSITIONAL: {
        ResourceClass.SYSTEM: (AccessOp.READ,),
        ResourceClass.PROTECTED_USER: _RW,
        ResourceClass.USER: _RW,
        ResourceClass.SANDBOX: _RW,
    },
    TrustLevel.VERIFIABLE: {ResourceClass.USER: _RW, ResourceClass.SANDBOX: _RW},
    TrustLevel.UNTRUSTABLE: {ResourceClass.SANDBOX: _RW},
    TrustLevel.DENIED: {},
}


class AccessMatrix:
    """(level, resource class, op) -> allowed."""

    def __init__(self, grants: Mapping[TrustLevel, Mapping[ResourceClass, Iterable[AccessOp]]]):
        self._allowed = frozenset(
            (level, rc, op)
            for level, per_class in grants.items()
            for rc, ops in per_class.items()
            for op in ops
        )

    @classmethod
    def default(cls) -> AccessMatrix:
        return cls(_DEFAULT_GRANTS)

    def allows(self, level: TrustLevel, resource: ResourceClass, op: AccessOp) -> bool:
        return (level, resource, op) in self._allowed

    def table(self) -> dict[tuple[TrustLevel, ResourceClass, AccessOp], bool]:
        return {(lv, rc, op): self.allows(lv, rc, op)
                for lv in TrustLevel for rc in ResourceClass for op in AccessOp}

    def is_monotone(self) -> bool:
        for lo in TrustLevel:
            for hi in TrustLevel:
                if hi < lo:
                    continue
                for rc in ResourceClass:
                    for op in AccessOp:
                        if self.allows(lo, rc, op) and not self.allows(hi, rc, op):
                            return False
        return not any(self.allows(TrustLevel.DENIED, rc, op) for rc in ResourceClass for op in AccessOp)


DEFAULT_MATRIX = AccessMatrix.default()


def check_access(level: TrustLevel, resource: ResourceClass, op: AccessOp,
                 matrix: AccessMatrix = DEFAULT_MATRIX) -> bool:
    return matrix.allows(level, resource, op)


@dataclass(frozen=True)
class AccessEvent:
    """A granted resource access."""

    pid: int
    code_id: str
    level: TrustLevel
    op: AccessOp
    resource: ResourceClass
    name: str


@dataclass(frozen=True)
class Violation:
    pid: int
    code_id: str
    outcome: ExecutionOutcome
    detail: str


@dataclass
class ExecutionResult:
    outcome: ExecutionOutcome
    root_pid: int
    events: list[TraceEvent]
    accesses: list[AccessEvent]
    audit: list[StateViolationReason]
    violation: Optional[Violation] = None
    total_cost: int = 0
    operations: int = 0

    def trace_lines(self) -> list[str]:
        return [str(event) for event in self.events]


# resolves a fork target to its code unit and the level it runs at
ForkResolver = Callable[[str], Optional[tuple[CodeUnit, TrustLevel]]]


class _Fault(Exception):
    def __init__(self, violation: Violation):
        super().__init__(violation.detail)
        self.violation = violation


class _Interpreter:
    def __init__(self, registry: StateRegistry, matrix: AccessMatrix,
                 resolver: Optional[ForkResolver], max_depth: int):
        self.registry = registry
        self.matrix = matrix
        self.resolver = resolver
        self.max_depth = max_depth
        self.accesses: list[AccessEvent] = []
        self.handled = False
        self.total_cost = 0
        self.operations = 0

    def _fault(self, pid: int, code: CodeUnit, outcome: ExecutionOutcome, detail: str) -> _Fault:
        return _Fault(Violation(pid, code.code_id, outcome, detail))

    def run(self, pid: int, code: CodeUnit, level: TrustLevel, depth: int) -> None:
        for ins in parse_workload(code.body):
            self.operations += ins.cost if ins.op == "COMPUTE" else 1
            if ins.op == "COMPUTE":
                self.total_cost += ins.cost
            elif ins.op in ("READ", "WRITE"):
                op = AccessOp(ins.op.lower())
                if not self.matrix.allows(level, ins.resource, op):
                    raise self._fault(pid, code, ExecutionOutcome.ACCESS_VIOLATION,
                                      f"{op.value} {ins.resource.value} {ins.name} denied at {level.label}")
                self.accesses.append(AccessEvent(pid, code.code_id, level, op, ins.resource, ins.name))
            elif ins.op == "FORK":
                self._fork(pid, code, ins.target, depth)
            elif ins.op == "RAISE_HANDLED":
                self.handled = True
            elif ins.op == "RAISE_UNHANDLED":
                raise self._fault(pid, code, ExecutionOutcome.UNHANDLED_ERROR,
                                  f"unhandled exception at line {ins.line_no}")
            elif ins.op == "EXIT":
                if ins.status == "failure":
                    self.handled = True
                self.registry.complete_process(pid, ins.status)
                return
        # falling off the end leaves the process Started; the audit catches it

    def _fork(self, pid: int, code: CodeUnit, target: str, depth: int) -> None:
        if depth + 1 > self.max_depth:
            raise self._fault(pid, code, ExecutionOutcome.STATE_VIOLATION,
                              f"fork depth {self.max_depth} exceeded")
        resolved = self.resolver(target) if self.resolver is not None else None
        if resolved is None:
            raise ForkTargetUnknown(target)
        child, child_level = resolved
        if child_level is TrustLevel.DENIED:
            raise self._fault(pid, code, ExecutionOutcome.ACCESS_VIOLATION,
                              f"fork of denied code {target}")
        child_pid = self.registry.begin_process(child.code_id, pid)
        self.run(child_pid, child, child_level, depth + 1)


def execute(code: CodeUnit, level: TrustLevel, registry: Optional[StateRegistry] = None,
            matrix: AccessMatrix = DEFAULT_MATRIX, fork_resolver: Optional[ForkResolver] = None,
            max_fork_depth: int = MAX_FORK_DEPTH) -> ExecutionResult:
    """Interpret *code* at *level* and classify the run.

    A denied access or unhandled raise aborts the faulting process and its
    ancestors. Audit reasons for processes aborted that way are part of the
    same fault; any other audit reason is an independent StateViolation.
    Forked children run depth-first at their own level.
    """
    if level is TrustLevel.DENIED:
        raise ValueError("Denied code cannot be executed")
    registry = registry if registry is not None else StateRegistry()
    interp = _Interpreter(registry, matrix, fork_resolver, max_fork_depth)
    root = registry.begin_process(code.code_id)

    violation = None
    unwound: set[int] = set()
    try:
        interp.run(root, code, level, 0)
    except _Fault as fault:
        violation = fault.violation
        for pid in registry.ancestors(violation.pid):
            if not registry.entries[pid].terminal:
                registry.abort_process(pid, violation.outcome.value)
            unwound.add(pid)

    reasons = registry.audit(root)
    outcomes = []
    if violation is not None:
        outcomes.append(violation.outcome)
    if any(r.pid not in unwound for r in reasons):
        outcomes.append(ExecutionOutcome.STATE_VIOLATION)
    if interp.handled:
        outcomes.append(ExecutionOutcome.HANDLED_ERROR)
    return ExecutionResult(
        outcome=dominant_outcome(outcomes),
        root_pid=root,
        events=list(registry.events),
        accesses=interp.accesses,
        audit=reasons,
        violation=violation,
        total_cost=interp.total_cost,
        operations=interp.operations,
    )
