"""Explicit trust engine.

Operating code carries a signed manifest and an evolving trust level. The
engine verifies integrity, executes workloads in a mode gated by trust,
audits process state, and updates trust from operational history.
"""

from .algorithm import (
    DEFAULT_PARAMS,
    AlgorithmParams,
    HistoryAggregate,
    classify_outcome,
    compute_score,
    effective_trust_level,
    initial_record,
    transition,
)
from .engine import ExecutionReport, TrustEngine, check_integrity
from .harness import AccessMatrix, AccessOp, check_access, execute, parse_workload
from .history import ExecutionRecord, HistoryLog, replay
from .integrity import (
    KeyPair,
    Manifest,
    authorize_update,
    canonical_hash,
    install,
    sign_manifest,
    verify_manifest,
)
from .model import (
    CodeUnit,
    Decision,
    ExecutionOutcome,
    Mode,
    Ordering,
    Principal,
    PrincipalKind,
    ResourceClass,
    TrustLevel,
    TrustRecord,
    Verdict,
    level_order,
)
from .registry import StateRegistry
from .scenarios import run_scenario
from .store import TrustStore

__version__ = "0.1.0"

__all__ = [
    "AccessMatrix",
    "AccessOp",
    "AlgorithmParams",
    "authorize_update",
    "canonical_hash",
    "check_access",
    "check_integrity",
    "classify_outcome",
    "CodeUnit",
    "compute_score",
    "Decision",
    "DEFAULT_PARAMS",
    "effective_trust_level",
    "execute",
    "ExecutionOutcome",
    "ExecutionRecord",
    "ExecutionReport",
    "HistoryAggregate",
    "HistoryLog",
    "initial_record",
    "install",
    "KeyPair",
    "level_order",
    "Manifest",
    "Mode",
    "Ordering",
    "parse_workload",
    "Principal",
    "PrincipalKind",
    "replay",
    "ResourceClass",
    "run_scenario",
    "sign_manifest",
    "StateRegistry",
    "transition",
    "TrustEngine",
    "TrustLevel",
    "TrustRecord",
    "TrustStore",
    "Verdict",
    "verify_manifest",
]
