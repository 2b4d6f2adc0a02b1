"""Shared domain vocabulary: trust levels, principals, code units, outcomes, verdicts."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Optional

SYSTEM_ID = "system"


class TrustLevel(enum.IntEnum):
    """Five trust levels, totally ordered by their integer value.

    ``OPERATIONAL > TRANSITIONAL > VERIFIABLE > UNTRUSTABLE > DENIED``.
    Operational/Verifiable/Denied form the functional category;
    Transitional/Untrustable are transactional.
    """

    DENIED = 0
    UNTRUSTABLE = 1
    VERIFIABLE = 2
    TRANSITIONAL = 3
    OPERATIONAL = 4

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @property
    def is_functional(self) -> bool:
        return self in _FUNCTIONAL

    @property
    def is_transactional(self) -> bool:
        return not self.is_functional

    @classmethod
    def from_label(cls, text: str) -> TrustLevel:
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"unknown trust level {text!r}") from None


_FUNCTIONAL = frozenset({TrustLevel.OPERATIONAL, TrustLevel.VERIFIABLE, TrustLevel.DENIED})
FUNCTIONAL_LEVELS = tuple(sorted(_FUNCTIONAL, reverse=True))


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def level_order(a: TrustLevel, b: TrustLevel) -> Ordering:
    if a == b:
        return Ordering.EQUAL
    return Ordering.GREATER if a > b else Ordering.LESS


def step_toward(level: TrustLevel, target: TrustLevel) -> TrustLevel:
    """Move one position along the order from *level* toward *target*."""
    if target > level:
        return TrustLevel(level + 1)
    if target < level:
        return TrustLevel(level - 1)
    return level


class PrincipalKind(enum.Enum):
    SYSTEM = "System"
    VENDOR = "Vendor"
    USER = "User"


@dataclass(frozen=True)
class Principal:
    id: str
    public_key: bytes
    owner_trust: float
    kind: PrincipalKind = PrincipalKind.USER

    def __post_init__(self):
        if not 0.0 <= self.owner_trust <= 1.0:
            raise ValueError(f"owner_trust must be in [0, 1], got {self.owner_trust}")
        if (self.kind is PrincipalKind.SYSTEM) != (self.id == SYSTEM_ID):
            raise ValueError("the System principal must have id 'system' and be the only one")


class ResourceClass(enum.Enum):
    SYSTEM = "system"
    PROTECTED_USER = "protected_user"
    USER = "user"
    SANDBOX = "sandbox"


class Mode(enum.Enum):
    FULL = "Full"
    STANDARD = "Standard"
    SANDBOX = "Sandbox"


MODE_FOR_LEVEL = {
    TrustLevel.OPERATIONAL: Mode.FULL,
    TrustLevel.TRANSITIONAL: Mode.STANDARD,
    TrustLevel.VERIFIABLE: Mode.STANDARD,
    TrustLevel.UNTRUSTABLE: Mode.SANDBOX,
}


class ExecutionOutcome(enum.Enum):
    SUCCESS = "Success"
    HANDLED_ERROR = "HandledError"
    UNHANDLED_ERROR = "UnhandledError"
    ACCESS_VIOLATION = "AccessViolation"
    STATE_VIOLATION = "StateViolation"
    INTEGRITY_FAILURE = "IntegrityFailure"

    @property
    def precedence(self) -> int:
        return _PRECEDENCE[self]


_PRECEDENCE = {
    ExecutionOutcome.SUCCESS: 0,
    ExecutionOutcome.HANDLED_ERROR: 1,
    ExecutionOutcome.UNHANDLED_ERROR: 2,
    ExecutionOutcome.STATE_VIOLATION: 3,
    ExecutionOutcome.ACCESS_VIOLATION: 4,
    ExecutionOutcome.INTEGRITY_FAILURE: 5,
}


def dominant_outcome(outcomes: Iterable[ExecutionOutcome]) -> ExecutionOutcome:
    """Highest-precedence outcome among *outcomes* (Success when empty)."""
    return max(outcomes, key=lambda o: o.precedence, default=ExecutionOutcome.SUCCESS)


def sha256_hex(body: bytes) -> str:
    return hashlib.sha256(body).hexdigest()


@dataclass(frozen=True)
class CodeUnit:
    """Operating code: manifest header fields plus the workload body."""

    code_id: str
    owner_id: str
    body: bytes
    body_hash: str
    line_count_n: int
    ops_per_line_k: float
    signature: Optional[bytes] = None

    @classmethod
    def from_body(cls, code_id: str, owner_id: str, body: bytes,
                  signature: Optional[bytes] = None) -> CodeUnit:
        """Build a unit, deriving hash, line count and k from *body*."""
        from .harness import operation_count, parse_workload

        instructions = parse_workload(body)
        n = len(instructions)
        if n == 0:
            raise ValueError("workload has no instructions")
        k = operation_count(instructions) / n
        return cls(code_id, owner_id, body, sha256_hex(body), n, k, signature)


@dataclass(frozen=True)
class TrustRecord:
    code_id: str
    functional_level: TrustLevel
    transactional_score: float
    effective_level: TrustLevel
    updated_seq: int = 0

    def __post_init__(self):
        if not self.functional_level.is_functional:
            raise ValueError(f"{self.functional_level.label} is not a functional level")
        if not 0.0 <= self.transactional_score <= 1.0:
            raise ValueError("transactional_score must be in [0, 1]")
        if self.functional_level is TrustLevel.DENIED and self.effective_level is not TrustLevel.DENIED:
            raise ValueError("functional Denied forces effective Denied")

    def to_json(self) -> dict:
        return {
            "code_id": self.code_id,
            "functional_level": self.functional_level.label,
            "transactional_score": self.transactional_score,
            "effective_level": self.effective_level.label,
            "updated_seq": self.updated_seq,
        }

    @classmethod
    def from_json(cls, obj: dict) -> TrustRecord:
        return cls(
            obj["code_id"],
            TrustLevel.from_label(obj["functional_level"]),
            float(obj["transactional_score"]),
            TrustLevel.from_label(obj["effective_level"]),
            int(obj["updated_seq"]),
        )


class Decision(enum.Enum):
    DENY = "DENY"
    EXECUTE = "EXECUTE"


@dataclass(frozen=True)
class Verdict:
    decision: Decision
    mode: Optional[Mode] = None
    reasons: tuple[str, ...] = field(default_factory=tuple)
    level: TrustLevel = TrustLevel.DENIED

    @classmethod
    def for_level(cls, level: TrustLevel, reasons: Iterable[str] = ()) -> Verdict:
        reasons = tuple(reasons) + (f"LEVEL_{level.name}",)
        if level is TrustLevel.DENIED:
            return cls(Decision.DENY, None, reasons, level)
        return cls(Decision.EXECUTE, MODE_FOR_LEVEL[level], reasons, level)

    @property
    def denied(self) -> bool:
        return self.decision is Decision.DENY

    def __str__(self) -> str:
        if self.denied:
            return "DENY"
        return f"EXECUTE({self.mode.value})"
