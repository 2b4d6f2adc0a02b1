"""Trust engine: the per-execution pipeline.

1. check the code's trust level
2. verify its integrity signature
3. pick the execution mode and run the workload
4. audit the state registry
5. append the outcome to the operational history
6. recompute the transactional score
7. store the updated trust record

Steps 5-7 land together or not at all.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .algorithm import AlgorithmParams, compute_score, transition
from .errors import MalformedManifest, TrustEngineError
from .harness import DEFAULT_MATRIX, AccessMatrix, ExecutionResult, execute
from .history import ExecutionRecord
from .integrity import Manifest, canonical_hash, verify_manifest
from .model import CodeUnit, ExecutionOutcome, TrustLevel, TrustRecord, Verdict
from .registry import StateRegistry
from .store import TrustStore


class IntegrityStatus(enum.Enum):
    OK = "ok"
    UNSIGNED = "unsigned"
    FAILED = "failed"


def check_integrity(store: TrustStore, code_id: str) -> tuple[IntegrityStatus, list[str]]:
    """Verify the stored body against its manifest and the original owner's key."""
    entry = store.install_entry(code_id)
    manifest_bytes = store.load_manifest_bytes(code_id)
    try:
        manifest = Manifest.parse(manifest_bytes)
    except MalformedManifest:
        return IntegrityStatus.FAILED, ["MALFORMED_MANIFEST"]
    body = store.code_path(code_id, ".etw").read_bytes()
    if manifest.hash != canonical_hash(body):
        return IntegrityStatus.FAILED, ["HASH_MISMATCH"]
    if not entry.signed:
        return IntegrityStatus.UNSIGNED, ["NO_SIGNATURE"]
    signature = store.load_signature(code_id)
    if signature is None:
        return IntegrityStatus.FAILED, ["SIGNATURE_MISSING"]
    owner = store.principals.get(entry.original_owner)
    if owner is None or not verify_manifest(manifest_bytes, signature, owner.public_key, body):
        return IntegrityStatus.FAILED, ["BAD_SIGNATURE"]
    return IntegrityStatus.OK, ["INTEGRITY_OK"]


class Construct(Protocol):
    """Optional application-specific policy add-on.

    Receives the engine's verdict and may return a stricter one.
    """

    def review(self, code_id: str, verdict: Verdict) -> Verdict: ...


@dataclass
class ExecutionReport:
    code_id: str
    verdict: Verdict
    outcome: Optional[ExecutionOutcome]
    record_before: TrustRecord
    record_after: TrustRecord
    score_before: float
    score_after: float
    seq: Optional[int] = None
    result: Optional[ExecutionResult] = None
    trace: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "code_id": self.code_id,
            "verdict": self.verdict.decision.value,
            "mode": self.verdict.mode.value if self.verdict.mode else None,
            "reasons": list(self.verdict.reasons),
            "outcome": self.outcome.value if self.outcome else None,
            "seq": self.seq,
            "score_before": self.score_before,
            "score_after": self.score_after,
            "level_before": self.record_before.effective_level.label,
            "level_after": self.record_after.effective_level.label,
        }


class BatchAborted(TrustEngineError):
    def __init__(self, reports: list[ExecutionReport], cause: Exception):
        super().__init__(f"batch aborted after {len(reports)} run(s): {cause}")
        self.reports = reports
        self.cause = cause


class TrustEngine:
    def __init__(self, store: TrustStore, params: Optional[AlgorithmParams] = None,
                 matrix: AccessMatrix = DEFAULT_MATRIX, constructs: Sequence[Construct] = ()):
        self.store = store
        self.params = params if params is not None else store.params
        self.matrix = matrix
        self.constructs = tuple(constructs)

    def _evaluate(self, code_id: str) -> tuple[Verdict, IntegrityStatus]:
        record = self.store.record(code_id)
        if record.effective_level is TrustLevel.DENIED:
            return Verdict.for_level(TrustLevel.DENIED), IntegrityStatus.FAILED
        status, reasons = check_integrity(self.store, code_id)
        level = record.effective_level
        if status is not IntegrityStatus.OK:
            level = min(level, TrustLevel.UNTRUSTABLE)
        verdict = Verdict.for_level(level, reasons)
        for construct in self.constructs:
            verdict = construct.review(code_id, verdict)
        return verdict, status

    def evaluate(self, code_id: str) -> Verdict:
        """Pre-execution verdict. Read-only."""
        return self._evaluate(code_id)[0]

    def _resolve_fork(self, code_id: str) -> Optional[tuple[CodeUnit, TrustLevel]]:
        if not self.store.has_code(code_id):
            return None
        verdict = self.evaluate(code_id)
        return self.store.load_code(code_id), verdict.level

    def run(self, code_id: str) -> ExecutionReport:
        record_before = self.store.record(code_id)
        verdict, status = self._evaluate(code_id)
        score_before = record_before.transactional_score
        if verdict.denied:
            return ExecutionReport(code_id, verdict, None, record_before, record_before,
                                   score_before, score_before)

        result = None
        if status is IntegrityStatus.FAILED:
            outcome = ExecutionOutcome.INTEGRITY_FAILURE
        else:
            result = execute(self.store.load_code(code_id), verdict.level, StateRegistry(),
                             self.matrix, self._resolve_fork)
            outcome = result.outcome

        agg = self.store.aggregate(code_id).with_outcome(outcome)
        score = compute_score(agg, self.store.owner_trust(code_id), self.params)
        seq = self.store.history.last_seq + 1
        record_after = transition(record_before, agg, score, status is IntegrityStatus.OK,
                                  self.params, seq)
        execution = ExecutionRecord(seq, code_id, outcome, verdict.mode, score,
                                    record_after.effective_level)
        self.store.commit_run(execution, record_after)
        return ExecutionReport(code_id, verdict, outcome, record_before, record_after,
                               score_before, score, seq, result,
                               result.trace_lines() if result else [])

    def batch(self, code_ids: Sequence[str]) -> list[ExecutionReport]:
        """Run each code in order. A Deny is a report, not an error; the first
        error aborts with the reports gathered so far."""
        reports: list[ExecutionReport] = []
        for code_id in code_ids:
            try:
                reports.append(self.run(code_id))
            except (TrustEngineError, OSError) as exc:
                raise BatchAborted(reports, exc) from exc
        return reports
