"""Scripted attack stories checked against the engine's mitigations.

Each scenario builds a private temporary store with deterministic keys,
drives installs, runs and updates through the public API and records
pass/fail per expectation plus a plain-text transcript.
"""

from __future__ import annotations

import hashlib
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .engine import ExecutionReport, TrustEngine
from .errors import UnknownScenario
from .harness import AccessOp
from .integrity import KeyPair, Manifest, authorize_update, install, sign_manifest
from .model import (
    CodeUnit,
    ExecutionOutcome,
    Mode,
    Principal,
    PrincipalKind,
    ResourceClass,
    TrustLevel,
)
from .store import TrustStore


@dataclass(frozen=True)
class Expectation:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    name: str
    expectations: list[Expectation]
    transcript: list[str]
    path: Optional[Path] = None

    @property
    def passed(self) -> bool:
        return bool(self.expectations) and all(e.passed for e in self.expectations)

    def summary_lines(self) -> list[str]:
        lines = [f"{'PASS' if e.passed else 'FAIL'} {self.name}: {e.name}"
                 + (f" ({e.detail})" if e.detail else "") for e in self.expectations]
        return lines


def store_digest(root: Path) -> str:
    """Digest over every file path and its bytes under *root*."""
    h = hashlib.sha256()
    for path in sorted(p for p in Path(root).rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode() + b"\0")
        h.update(path.read_bytes() + b"\0")
    return h.hexdigest()


def unsafe_system_writes(reports: list[ExecutionReport]) -> list[str]:
    """Granted System-class writes made below Operational."""
    found = []
    for report in reports:
        if report.result is None:
            continue
        for acc in report.result.accesses:
            if (acc.op is AccessOp.WRITE and acc.resource is ResourceClass.SYSTEM
                    and acc.level < TrustLevel.OPERATIONAL):
                found.append(f"seq {report.seq} {acc.code_id} wrote {acc.name} at {acc.level.label}")
    return found


class _Story:
    def __init__(self, root: Path):
        self.root = root
        self.store = TrustStore(root)
        self.engine = TrustEngine(self.store)
        self.keys: dict[str, KeyPair] = {}
        self.transcript: list[str] = []
        self.expectations: list[Expectation] = []
        self.reports: list[ExecutionReport] = []

    def log(self, line: str) -> None:
        self.transcript.append(line)

    def principal(self, pid: str, trust: float, kind: PrincipalKind = PrincipalKind.USER) -> KeyPair:
        keys = KeyPair.from_seed(f"scenario-principal:{pid}")
        self.keys[pid] = keys
        self.store.add_principal(Principal(pid, keys.public_key, trust, kind))
        self.log(f"principal {pid} kind={kind.value} owner_trust={trust}")
        return keys

    def install(self, code_id: str, owner: str, body: str, signed: bool = True,
                as_system: bool = False) -> CodeUnit:
        unit = CodeUnit.from_body(code_id, owner, body.encode())
        if signed:
            sig = sign_manifest(Manifest.for_code(unit), self.keys[owner].private_key)
            unit = CodeUnit.from_body(code_id, owner, body.encode(), sig)
        installed, record = install(unit, self.store, as_system=as_system)
        self.log(f"install {code_id} owner={installed.owner_id} signed={signed} "
                 f"functional={record.functional_level.label} effective={record.effective_level.label} "
                 f"score={record.transactional_score!r}")
        return installed

    def run(self, code_id: str) -> ExecutionReport:
        report = self.engine.run(code_id)
        self.reports.append(report)
        outcome = report.outcome.value if report.outcome else "-"
        seq = report.seq if report.seq is not None else "-"
        self.log(f"run seq={seq} {code_id} verdict={report.verdict} outcome={outcome} "
                 f"score={report.score_after!r} level={report.record_before.effective_level.label}"
                 f"->{report.record_after.effective_level.label}")
        if report.result and report.result.audit:
            self.log("  audit " + " ".join(str(r) for r in report.result.audit))
        return report

    def expect(self, name: str, passed: bool, detail: str = "") -> None:
        self.expectations.append(Expectation(name, bool(passed), detail))
        self.log(f"expect {'PASS' if passed else 'FAIL'} {name}")

    def level(self, code_id: str) -> TrustLevel:
        return self.store.record(code_id).effective_level

    def digest(self) -> str:
        return store_digest(self.root)

    def finish(self) -> None:
        unsafe = unsafe_system_writes(self.reports)
        self.expect("no System write below Operational", not unsafe, "; ".join(unsafe))
        self.store.close()


def _executed(reports: list[ExecutionReport], code_id: str) -> list[ExecutionReport]:
    return [r for r in reports if r.code_id == code_id and not r.verdict.denied]


def _service_disruption(s: _Story) -> None:
    s.principal("vendor", 0.8, PrincipalKind.VENDOR)
    s.principal("anon", 0.3)
    s.install("server", "vendor", "READ user inbox\nCOMPUTE 3\nWRITE user outbox\nEXIT success\n")
    s.install("client", "anon", "COMPUTE 1\nWRITE user inbox\nEXIT success\n", signed=False)

    for _ in range(25):
        s.run("client")
        s.run("server")

    client = _executed(s.reports, "client")
    server = _executed(s.reports, "server")
    s.expect("client only ever runs sandboxed", all(r.verdict.mode is Mode.SANDBOX for r in client))
    s.expect("client flood yields AccessViolation",
             all(r.outcome is ExecutionOutcome.ACCESS_VIOLATION for r in client))
    s.expect("client demoted to Denied", s.level("client") is TrustLevel.DENIED,
             f"after {len(client)} executed runs")
    before = s.digest()
    final = s.run("client")
    s.expect("denied client refused without touching the store",
             final.verdict.denied and final.outcome is None and s.digest() == before)
    s.expect("server keeps serving during the flood",
             len(server) == 25 and all(r.outcome is ExecutionOutcome.SUCCESS for r in server))
    s.expect("server state audits clean", all(not r.result.audit for r in server))


def _privilege_escalation(s: _Story) -> None:
    s.principal("appdev", 0.5, PrincipalKind.VENDOR)
    s.install("overflow", "appdev",
              "READ sandbox buffer\nRAISE_UNHANDLED\nWRITE system kernel.mem\nEXIT success\n")
    s.install("payload", "appdev", "WRITE system kernel.mem\nEXIT success\n")

    for _ in range(22):
        s.run("overflow")
        s.run("payload")

    overflow = _executed(s.reports, "overflow")
    payload = _executed(s.reports, "payload")
    s.expect("overflow attempts end in UnhandledError",
             all(r.outcome is ExecutionOutcome.UNHANDLED_ERROR for r in overflow))
    s.expect("escalation attempts end in AccessViolation",
             all(r.outcome is ExecutionOutcome.ACCESS_VIOLATION for r in payload))
    for code_id in ("overflow", "payload"):
        levels = [r.record_after.effective_level for r in _executed(s.reports, code_id)]
        s.expect(f"{code_id} demoted through Untrustable to Denied",
                 TrustLevel.UNTRUSTABLE in levels and s.level(code_id) is TrustLevel.DENIED)
    s.expect("no attempt ever ran in Full mode",
             not any(r.verdict.mode is Mode.FULL for r in overflow + payload))


def _data_theft(s: _Story) -> None:
    s.principal("anon", 0.3)
    s.principal("vendor", 0.6, PrincipalKind.VENDOR)
    s.install("trojan", "anon", "READ user documents\nREAD protected_user contacts.db\nEXIT success\n",
              signed=False)
    s.install("utility", "vendor", "READ user documents\nREAD protected_user keychain\nEXIT success\n")

    for _ in range(3):
        s.run("trojan")
        s.run("utility")

    trojan = _executed(s.reports, "trojan")
    utility = _executed(s.reports, "utility")
    s.expect("unsigned trojan only gets a Sandbox verdict",
             all(r.verdict.mode is Mode.SANDBOX and "NO_SIGNATURE" in r.verdict.reasons for r in trojan))
    s.expect("trojan read attempts end in AccessViolation",
             all(r.outcome is ExecutionOutcome.ACCESS_VIOLATION for r in trojan))
    s.expect("Verifiable utility cannot read protected user data",
             all(r.verdict.mode is Mode.STANDARD and r.outcome is ExecutionOutcome.ACCESS_VIOLATION
                 for r in utility))
    leaked = [a for r in s.reports if r.result for a in r.result.accesses
              if a.resource is ResourceClass.PROTECTED_USER]
    s.expect("no protected user resource was ever accessed", not leaked)


def _system_corruption(s: _Story) -> None:
    s.principal("vendor", 0.9, PrincipalKind.VENDOR)
    attacker = s.principal("attacker", 0.5)
    boot = s.install("bootloader", "vendor", "READ system mbr\nWRITE system mbr\nEXIT success\n",
                     as_system=True)
    s.expect("system install transfers ownership and grants Operational",
             boot.owner_id == "system" and s.level("bootloader") is TrustLevel.OPERATIONAL)
    first = s.run("bootloader")
    s.expect("system code runs in Full mode", first.verdict.mode is Mode.FULL
             and first.outcome is ExecutionOutcome.SUCCESS)

    evil_body = b"WRITE system mbr\nCOMPUTE 666\nEXIT success\n"
    evil = CodeUnit.from_body("bootloader", "vendor", evil_body)
    evil_manifest = Manifest.for_code(evil)
    before = s.digest()
    accepted = authorize_update(s.store, "bootloader", evil_body, evil_manifest,
                                sign_manifest(evil_manifest, attacker.private_key))
    s.log(f"update bootloader signed-by=attacker accepted={accepted}")
    s.expect("update signed by a non-original owner is rejected", accepted is False)
    s.expect("rejected update leaves the store unchanged", s.digest() == before)

    body_path = s.store.code_path("bootloader", ".etw")
    body_path.write_bytes(evil_body)
    s.log("tamper bootloader body on disk")
    tampered = s.run("bootloader")
    s.expect("tampered body yields IntegrityFailure",
             tampered.outcome is ExecutionOutcome.INTEGRITY_FAILURE
             and tampered.verdict.mode is Mode.SANDBOX and not tampered.trace)
    s.expect("integrity failure demotes one level",
             tampered.record_after.effective_level is TrustLevel.TRANSITIONAL)

    fixed_body = b"READ system mbr\nWRITE system mbr\nCOMPUTE 1\nEXIT success\n"
    fixed = CodeUnit.from_body("bootloader", "vendor", fixed_body)
    fixed_manifest = Manifest.for_code(fixed)
    n_before = s.store.aggregate("bootloader").total
    accepted = authorize_update(s.store, "bootloader", fixed_body, fixed_manifest,
                                sign_manifest(fixed_manifest, s.keys["vendor"].private_key))
    s.log(f"update bootloader signed-by=vendor accepted={accepted}")
    after = s.run("bootloader")
    s.expect("original vendor update accepted and history retained",
             accepted and s.store.aggregate("bootloader").total == n_before + 1
             and after.outcome is not ExecutionOutcome.INTEGRITY_FAILURE)


def _protocol_exploitation(s: _Story) -> None:
    s.principal("netdev", 0.5, PrincipalKind.VENDOR)
    s.install("handler", "netdev", "COMPUTE 2\nREAD sandbox packet\n")
    s.install("listener", "netdev", "READ sandbox socket\nFORK handler\nEXIT success\n")

    for _ in range(12):
        s.run("listener")

    runs = _executed(s.reports, "listener")
    s.expect("unterminated child processes are trapped as StateViolation",
             all(r.outcome is ExecutionOutcome.STATE_VIOLATION for r in runs))
    s.expect("audit names the dangling child",
             all(any(str(reason).startswith("DanglingChild") for reason in r.result.audit) for r in runs))
    levels = [r.record_after.effective_level for r in runs]
    s.expect("repeated violations demote the listener",
             levels[-1] < TrustLevel.VERIFIABLE and levels.index(TrustLevel.UNTRUSTABLE) == 9)


SCENARIOS: dict[str, Callable[[_Story], None]] = {
    "service-disruption": _service_disruption,
    "privilege-escalation": _privilege_escalation,
    "data-theft": _data_theft,
    "system-corruption": _system_corruption,
    "protocol-exploitation": _protocol_exploitation,
}


def run_scenario(name: str, keep: bool = False) -> ScenarioReport:
    """Run one scenario in a fresh temporary store.

    With ``keep`` the store and ``transcript.txt`` are left in the returned
    report's ``path``; otherwise both are removed.
    """
    if name not in SCENARIOS:
        raise UnknownScenario(name)
    workdir = Path(tempfile.mkdtemp(prefix=f"trust-scenario-{name}-"))
    try:
        story = _Story(workdir / "store")
        try:
            SCENARIOS[name](story)
        finally:
            story.finish()
        (workdir / "transcript.txt").write_text("\n".join(story.transcript) + "\n")
        return ScenarioReport(name, story.expectations, story.transcript, workdir if keep else None)
    finally:
        if not keep:
            shutil.rmtree(workdir, ignore_errors=True)


def run_all(keep: bool = False) -> list[ScenarioReport]:
    return [run_scenario(name, keep) for name in SCENARIOS]
