"""On-disk trust store.

Directory layout::

    lock               single-writer lock (flock)
    history.jsonl      append-only execution log (authoritative)
    trust.jsonl        current TrustRecord per code_id, rewritten atomically
    principals.jsonl   registered principals, including the ``system`` principal
    installs.jsonl     per-code ownership and provenance
    code/<id>.etm      canonical manifest
    code/<id>.etw      workload body
    code/<id>.sig      detached signature, hex (absent for unsigned code)
"""

from __future__ import annotations

import fcntl
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Union

from .algorithm import DEFAULT_PARAMS, AlgorithmParams, HistoryAggregate, initial_record
from .errors import DuplicatePrincipal, StorageFailure, StoreLocked, UnknownCode
from .history import ExecutionRecord, HistoryLog
from .integrity import Manifest
from .model import SYSTEM_ID, CodeUnit, Principal, PrincipalKind, TrustLevel, TrustRecord

@dataclass(frozen=True)
class InstallEntry:
    code_id: str
    owner_id: str
    original_owner: str
    signed: bool

    def to_json(self) -> dict:
        return {"code_id": self.code_id, "owner_id": self.owner_id,
                "original_owner": self.original_owner, "signed": self.signed}


def atomic_write(path: Path, data: bytes) -> None:
    """Write *data* to *path* via a temp file and rename."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonl(objs: Iterable[dict]) -> bytes:
    return "".join(json.dumps(o, separators=(",", ":")) + "\n" for o in objs).encode("utf-8")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    try:
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise StorageFailure(f"{path.name}: {exc}") from exc


def _principal_json(p: Principal) -> dict:
    return {"id": p.id, "kind": p.kind.value, "owner_trust": p.owner_trust,
            "public_key": p.public_key.hex()}


class TrustStore:
    """A store directory opened by a single writer.

    ``readonly=True`` skips the lock and refuses every mutation.
    """

    def __init__(self, root: Union[str, Path], params: AlgorithmParams = DEFAULT_PARAMS,
                 readonly: bool = False):
        self.root = Path(root)
        self.params = params
        self.readonly = readonly
        self._lock_fd: Optional[int] = None
        if not readonly:
            self.root.mkdir(parents=True, exist_ok=True)
            (self.root / "code").mkdir(exist_ok=True)
            self._acquire_lock()
        elif not self.root.is_dir():
            raise StorageFailure(f"no store at {self.root}")
        try:
            self._load()
        except BaseException:
            self.close()
            raise

    # -- lifecycle ----------------------------------------------------------
    def _acquire_lock(self) -> None:
        fd = os.open(self.root / "lock", os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            os.close(fd)
            raise StoreLocked(f"store {self.root} is locked by another writer") from None
        self._lock_fd = fd

    def close(self) -> None:
        if self._lock_fd is not None:
            fcntl.flock(self._lock_fd, fcntl.LOCK_UN)
            os.close(self._lock_fd)
            self._lock_fd = None

    def __enter__(self) -> TrustStore:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _check_writable(self) -> None:
        if self.readonly:
            raise StorageFailure("store opened read-only")

    def _load(self) -> None:
        self.principals: dict[str, Principal] = {}
        for obj in _read_jsonl(self.root / "principals.jsonl"):
            p = Principal(obj["id"], bytes.fromhex(obj["public_key"]), float(obj["owner_trust"]),
                          PrincipalKind(obj["kind"]))
            self.principals[p.id] = p
        if SYSTEM_ID not in self.principals and not self.readonly:
            self.add_principal(Principal(SYSTEM_ID, b"", 1.0, PrincipalKind.SYSTEM))

        self.installs: dict[str, InstallEntry] = {
            obj["code_id"]: InstallEntry(obj["code_id"], obj["owner_id"], obj["original_owner"],
                                         bool(obj["signed"]))
            for obj in _read_jsonl(self.root / "installs.jsonl")
        }
        self.records: dict[str, TrustRecord] = {
            obj["code_id"]: TrustRecord.from_json(obj)
            for obj in _read_jsonl(self.root / "trust.jsonl")
        }
        self.history = HistoryLog(self.root / "history.jsonl")
        self._reconcile()

    def _reconcile(self) -> None:
        """Bring trust.jsonl forward to history if a writer died between the two,
        and rebuild any record that is missing outright."""
        stale = False
        for code_id, entry in self.installs.items():
            record = self.records.get(code_id)
            last = self.history.last_record(code_id)
            if last is not None and (record is None or last.seq > record.updated_seq):
                self.records[code_id] = TrustRecord(
                    code_id,
                    last.level_after if last.level_after in (TrustLevel.OPERATIONAL, TrustLevel.DENIED)
                    else TrustLevel.VERIFIABLE,
                    last.score_after, last.level_after, last.seq)
                stale = True
            elif record is None:
                self.records[code_id] = initial_record(
                    code_id, entry.owner_id == SYSTEM_ID,
                    self.principals[entry.original_owner].owner_trust, entry.signed, self.params)
                stale = True
        if stale and not self.readonly:
            self._write_trust()

    # -- principals ---------------------------------------------------------
    def add_principal(self, principal: Principal) -> None:
        self._check_writable()
        if principal.id in self.principals:
            raise DuplicatePrincipal(principal.id)
        self.principals[principal.id] = principal
        atomic_write(self.root / "principals.jsonl",
                     _jsonl(_principal_json(p) for p in self.principals.values()))

    def owner_trust(self, code_id: str) -> float:
        return self.principals[self.install_entry(code_id).original_owner].owner_trust

    # -- code ---------------------------------------------------------------
    def has_code(self, code_id: str) -> bool:
        return code_id in self.installs

    def code_ids(self) -> list[str]:
        return sorted(self.installs)

    def install_entry(self, code_id: str) -> InstallEntry:
        try:
            return self.installs[code_id]
        except KeyError:
            raise UnknownCode(code_id) from None

    def code_path(self, code_id: str, suffix: str) -> Path:
        return self.root / "code" / f"{code_id}{suffix}"

    def _write_code_files(self, manifest: Manifest, body: bytes, signature: Optional[bytes]) -> None:
        code_id = manifest.code_id
        atomic_write(self.code_path(code_id, ".etw"), body)
        atomic_write(self.code_path(code_id, ".etm"), manifest.serialize())
        sig_path = self.code_path(code_id, ".sig")
        if signature is not None:
            atomic_write(sig_path, (signature.hex() + "\n").encode("ascii"))
        elif sig_path.exists():
            sig_path.unlink()

    def add_code(self, manifest: Manifest, body: bytes, signature: Optional[bytes],
                 owner_id: str, original_owner: str, record: TrustRecord) -> None:
        self._check_writable()
        self._write_code_files(manifest, body, signature)
        self.installs[manifest.code_id] = InstallEntry(manifest.code_id, owner_id, original_owner,
                                                       signature is not None)
        atomic_write(self.root / "installs.jsonl",
                     _jsonl(e.to_json() for e in sorted(self.installs.values(), key=lambda e: e.code_id)))
        self.records[manifest.code_id] = record
        self._write_trust()

    def replace_code(self, manifest: Manifest, body: bytes, signature: bytes) -> None:
        self._check_writable()
        self.install_entry(manifest.code_id)
        self._write_code_files(manifest, body, signature)

    def load_manifest_bytes(self, code_id: str) -> bytes:
        self.install_entry(code_id)
        return self.code_path(code_id, ".etm").read_bytes()

    def load_signature(self, code_id: str) -> Optional[bytes]:
        path = self.code_path(code_id, ".sig")
        if not path.exists():
            return None
        try:
            return bytes.fromhex(path.read_text().strip())
        except ValueError:
            return b"\x00"  # unreadable signature never verifies

    def load_code(self, code_id: str) -> CodeUnit:
        """The installed unit as stored on disk. Header fields come from the
        manifest, so a modified body shows up as a hash mismatch."""
        entry = self.install_entry(code_id)
        manifest = Manifest.parse(self.load_manifest_bytes(code_id))
        body = self.code_path(code_id, ".etw").read_bytes()
        return CodeUnit(code_id, entry.owner_id, body, manifest.hash, manifest.lines, manifest.k,
                        self.load_signature(code_id))

    # -- trust records and history -----------------------------------------
    def record(self, code_id: str) -> TrustRecord:
        self.install_entry(code_id)
        return self.records[code_id]

    def aggregate(self, code_id: str) -> HistoryAggregate:
        return self.history.aggregate(code_id)

    def _write_trust(self) -> None:
        atomic_write(self.root / "trust.jsonl",
                     _jsonl(self.records[c].to_json() for c in sorted(self.records)))

    def commit_run(self, execution: ExecutionRecord, record: TrustRecord) -> None:
        """Append *execution* and persist *record*, or do neither."""
        self._check_writable()
        size = self.history.size()
        previous = self.records[record.code_id]
        self.history.append(execution)
        try:
            self.records[record.code_id] = record
            self._write_trust()
        except OSError as exc:
            self.records[record.code_id] = previous
            self.history.rollback(size)
            raise StorageFailure(f"trust update failed: {exc}") from exc
