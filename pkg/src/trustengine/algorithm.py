"""Deterministic trust algorithm.

The transactional score blends the owner's trust (as a prior worth
``prior_weight`` pseudo-executions) with the observed history, penalising
failures ``failure_penalty`` times as hard as successes are rewarded::

    score = clamp((k0 * owner_trust + S - lam * F) / (k0 + N), 0, 1)

Level changes move at most one step per execution and are gated on minimum
execution counts; promote thresholds sit strictly above the matching
demote thresholds so a score hovering at a boundary cannot flap.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

from .model import ExecutionOutcome, TrustLevel, TrustRecord, step_toward

CORRECT_OUTCOMES = frozenset({ExecutionOutcome.SUCCESS, ExecutionOutcome.HANDLED_ERROR})


@dataclass(frozen=True)
class AlgorithmParams:
    prior_weight: float = 10.0
    failure_penalty: float = 2.0
    promote_transitional: float = 0.6
    promote_operational: float = 0.9
    demote_transitional: float = 0.5
    demote_untrustable: float = 0.3
    demote_denied: float = 0.1
    recover_verifiable: float = 0.4
    min_n_promote1: int = 10
    min_n_promote2: int = 50
    min_n_demote: int = 10
    min_n_deny: int = 20

    def __post_init__(self):
        if not self.prior_weight > 0:
            raise ValueError("prior_weight must be positive")
        if not self.failure_penalty >= 1:
            raise ValueError("failure_penalty must be >= 1")
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name.startswith(("promote_", "demote_", "recover_")) and not 0.0 <= value <= 1.0:
                raise ValueError(f"{f.name} must be in [0, 1]")
            if f.name.startswith("min_n_") and (not isinstance(value, int) or value < 0):
                raise ValueError(f"{f.name} must be a non-negative integer")
        for promote, demote in self.hysteresis_pairs():
            if not getattr(self, promote) > getattr(self, demote):
                raise ValueError(f"{promote} must exceed {demote}")

    @staticmethod
    def hysteresis_pairs() -> tuple[tuple[str, str], ...]:
        return (
            ("promote_transitional", "demote_transitional"),
            ("recover_verifiable", "demote_untrustable"),
        )

    @classmethod
    def from_text(cls, text: str) -> AlgorithmParams:
        """Parse a flat ``key = value`` config; ``#`` starts a comment."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep or key not in types:
                raise ValueError(f"params line {line_no}: unrecognised entry {raw!r}")
            values[key] = int(value) if types[key] == "int" else float(value)
        return cls(**values)

    @classmethod
    def load(cls, path: Union[str, Path]) -> AlgorithmParams:
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in dataclasses.fields(self))


DEFAULT_PARAMS = AlgorithmParams()


@dataclass(frozen=True)
class HistoryAggregate:
    code_id: str
    successes: int = 0
    failures: int = 0
    last_outcome: Optional[ExecutionOutcome] = None

    @property
    def total(self) -> int:
        return self.successes + self.failures

    def with_outcome(self, outcome: ExecutionOutcome) -> HistoryAggregate:
        if classify_outcome(outcome):
            return replace(self, successes=self.successes + 1, last_outcome=outcome)
        return replace(self, failures=self.failures + 1, last_outcome=outcome)


def classify_outcome(outcome: ExecutionOutcome) -> bool:
    """True for a correct execution, False for an incorrect one.

    A handled error is correct: the code dealt with its own exception.
    """
    return outcome in CORRECT_OUTCOMES


def compute_score(agg: HistoryAggregate, owner_trust: float,
                  params: AlgorithmParams = DEFAULT_PARAMS) -> float:
    if not 0.0 <= owner_trust <= 1.0:
        raise ValueError("owner_trust must be in [0, 1]")
    k0 = params.prior_weight
    raw = (k0 * owner_trust + agg.successes - params.failure_penalty * agg.failures) / (k0 + agg.total)
    return min(1.0, max(0.0, raw))


def effective_trust_level(functional: TrustLevel, score: float, total_execs: int,
                          params: AlgorithmParams = DEFAULT_PARAMS) -> TrustLevel:
    """Level implied by the threshold table alone, with no prior effective level.

    Used for cold evaluation (e.g. at install). ``transition`` is the
    stateful counterpart that applies hysteresis and the one-step rule.
    """
    if not 0.0 <= score <= 1.0:
        raise ValueError("score must be in [0, 1]")
    if functional in (TrustLevel.DENIED, TrustLevel.OPERATIONAL):
        return functional
    if score >= params.promote_transitional and total_execs >= params.min_n_promote1:
        return TrustLevel.TRANSITIONAL
    if score < params.demote_untrustable and total_execs >= params.min_n_demote:
        return TrustLevel.UNTRUSTABLE
    return TrustLevel.VERIFIABLE


def initial_record(code_id: str, system_owned: bool, owner_trust: float, signed: bool,
                   params: AlgorithmParams = DEFAULT_PARAMS) -> TrustRecord:
    """Trust record for freshly installed code; unsigned code starts sandboxed."""
    functional = TrustLevel.OPERATIONAL if system_owned else TrustLevel.VERIFIABLE
    effective = effective_trust_level(functional, owner_trust, 0, params)
    if not signed:
        effective = min(effective, TrustLevel.UNTRUSTABLE)
    return TrustRecord(code_id, functional, owner_trust, effective, 0)


def _functional_for(level: TrustLevel) -> TrustLevel:
    if level in (TrustLevel.OPERATIONAL, TrustLevel.DENIED):
        return level
    return TrustLevel.VERIFIABLE


def transition(record: TrustRecord, agg: HistoryAggregate, score: float, integrity_ok: bool,
               params: AlgorithmParams = DEFAULT_PARAMS, seq: Optional[int] = None) -> TrustRecord:
    """Next trust record after one execution; moves at most one level."""
    seq = record.updated_seq if seq is None else seq
    level = record.effective_level
    n = agg.total
    p = params

    if record.functional_level is TrustLevel.DENIED or level is TrustLevel.DENIED:
        new = TrustLevel.DENIED
    elif not integrity_ok:
        if score < p.demote_untrustable and n >= p.min_n_demote:
            target = TrustLevel.DENIED
        else:
            target = TrustLevel.UNTRUSTABLE
        new = step_toward(level, target)
    elif level is TrustLevel.VERIFIABLE:
        if score >= p.promote_transitional and n >= p.min_n_promote1:
            new = TrustLevel.TRANSITIONAL
        elif score < p.demote_untrustable and n >= p.min_n_demote:
            new = TrustLevel.UNTRUSTABLE
        else:
            new = level
    elif level is TrustLevel.TRANSITIONAL:
        if score >= p.promote_operational and n >= p.min_n_promote2:
            new = TrustLevel.OPERATIONAL
        elif score < p.demote_transitional:
            new = TrustLevel.VERIFIABLE
        else:
            new = level
    elif level is TrustLevel.UNTRUSTABLE:
        if score >= p.recover_verifiable:
            new = TrustLevel.VERIFIABLE
        elif score < p.demote_denied and n >= p.min_n_deny:
            new = TrustLevel.DENIED
        else:
            new = level
    else:
        new = level

    return TrustRecord(record.code_id, _functional_for(new), score, new, seq)
