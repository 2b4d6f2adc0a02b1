"""Hashing, manifest signing/verification, install-time ownership transfer and
owner-verified updates.

Manifests are a fixed five-line text header::

    id: <code_id>
    owner: <owner_id>
    hash: <sha256 hex of body>
    lines: <instruction count>
    k: <ops per line>

Signatures are detached Ed25519 over those exact bytes.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .algorithm import initial_record
from .errors import (
    DuplicateCode,
    MalformedManifest,
    NotSystemOwned,
    SystemInstallRequiresValidSignature,
    UnknownOriginalOwner,
    UnknownOwner,
)
from .harness import parse_workload
from .model import SYSTEM_ID, CodeUnit, TrustRecord, sha256_hex

if TYPE_CHECKING:
    from .store import InstallEntry, TrustStore

_ID_RE = re.compile(r"[A-Za-z0-9._-]+")
_HEX64_RE = re.compile(r"[0-9a-f]{64}")
_FIELDS = ("id", "owner", "hash", "lines", "k")


def canonical_hash(body: bytes) -> str:
    return sha256_hex(body)


def format_k(k: float) -> str:
    return repr(float(k))


@dataclass(frozen=True)
class Manifest:
    code_id: str
    owner_id: str
    hash: str
    lines: int
    k: float

    def __post_init__(self):
        for name in ("code_id", "owner_id"):
            if not _ID_RE.fullmatch(getattr(self, name)):
                raise MalformedManifest(f"{name} {getattr(self, name)!r} is not a valid identifier")
        if not _HEX64_RE.fullmatch(self.hash):
            raise MalformedManifest("hash must be 64 lowercase hex characters")
        if isinstance(self.lines, bool) or not isinstance(self.lines, int) or self.lines < 1:
            raise MalformedManifest("lines must be a positive integer")
        if not self.k > 0 or self.k != self.k or self.k == float("inf"):
            raise MalformedManifest("k must be a positive finite number")

    @classmethod
    def for_code(cls, code: CodeUnit) -> Manifest:
        return cls(code.code_id, code.owner_id, code.body_hash, code.line_count_n, code.ops_per_line_k)

    def serialize(self) -> bytes:
        text = (
            f"id: {self.code_id}\n"
            f"owner: {self.owner_id}\n"
            f"hash: {self.hash}\n"
            f"lines: {self.lines}\n"
            f"k: {format_k(self.k)}\n"
        )
        return text.encode("utf-8")

    @classmethod
    def parse(cls, data: bytes) -> Manifest:
        """Parse canonical manifest bytes; anything non-canonical is rejected."""
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedManifest("manifest is not UTF-8") from exc
        if not text.endswith("\n") or "\r" in text:
            raise MalformedManifest("manifest must use LF line endings with a final newline")
        lines = text[:-1].split("\n")
        if len(lines) != len(_FIELDS):
            raise MalformedManifest(f"expected {len(_FIELDS)} lines, got {len(lines)}")
        values = {}
        for line_no, (line, key) in enumerate(zip(lines, _FIELDS), start=1):
            prefix = f"{key}: "
            if not line.startswith(prefix):
                raise MalformedManifest(f"line {line_no}: expected '{prefix}'")
            values[key] = line[len(prefix):]
        try:
            lines_n = int(values["lines"])
            k = float(values["k"])
        except ValueError as exc:
            raise MalformedManifest(str(exc)) from exc
        manifest = cls(values["id"], values["owner"], values["hash"], lines_n, k)
        if manifest.serialize() != data:
            raise MalformedManifest("manifest is not in canonical form")
        return manifest


@dataclass(frozen=True)
class KeyPair:
    private_key: bytes
    public_key: bytes

    @classmethod
    def generate(cls) -> KeyPair:
        return cls.from_private(Ed25519PrivateKey.generate().private_bytes(
            serialization.Encoding.Raw, serialization.PrivateFormat.Raw,
            serialization.NoEncryption()))

    @classmethod
    def from_private(cls, private_key: bytes) -> KeyPair:
        sk = Ed25519PrivateKey.from_private_bytes(private_key)
        pub = sk.public_key().public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        return cls(bytes(private_key), pub)

    @classmethod
    def from_seed(cls, seed: str) -> KeyPair:
        """Deterministic key pair, for reproducible demos and tests."""
        return cls.from_private(hashlib.sha256(seed.encode("utf-8")).digest())

    def save(self, prefix: Union[str, Path]) -> tuple[Path, Path]:
        prefix = Path(prefix)
        priv, pub = prefix.with_name(prefix.name + ".key"), prefix.with_name(prefix.name + ".pub")
        priv.write_text(self.private_key.hex() + "\n")
        pub.write_text(self.public_key.hex() + "\n")
        return priv, pub


def read_hex_file(path: Union[str, Path]) -> bytes:
    return bytes.fromhex(Path(path).read_text().strip())


def _manifest_bytes(manifest: Union[Manifest, bytes]) -> bytes:
    return manifest.serialize() if isinstance(manifest, Manifest) else bytes(manifest)


def sign_manifest(manifest: Union[Manifest, bytes], private_key: bytes) -> bytes:
    data = _manifest_bytes(manifest)
    Manifest.parse(data)
    return Ed25519PrivateKey.from_private_bytes(private_key).sign(data)


def verify_manifest(manifest: Union[Manifest, bytes], signature: Optional[bytes],
                    public_key: bytes, body: Optional[bytes] = None) -> bool:
    """True iff *signature* is valid over the canonical manifest and, when
    *body* is given, the manifest hash matches it. Never raises."""
    if not signature:
        return False
    try:
        data = _manifest_bytes(manifest)
        parsed = Manifest.parse(data)
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, data)
    except (InvalidSignature, MalformedManifest, ValueError, TypeError):
        return False
    if body is not None and parsed.hash != canonical_hash(body):
        return False
    return True


def install(code: CodeUnit, store: TrustStore, as_system: bool = False) -> tuple[CodeUnit, TrustRecord]:
    """Register *code* in *store* and create its initial trust record.

    System installs transfer ownership to ``system`` and start Operational.
    Other signed code starts Verifiable; unsigned code is admitted but starts
    Untrustable. The score starts at the original owner's trust.
    """
    if store.has_code(code.code_id):
        raise DuplicateCode(code.code_id)
    owner = store.principals.get(code.owner_id)
    if owner is None:
        raise UnknownOwner(code.owner_id)
    if code.body_hash != canonical_hash(code.body):
        raise MalformedManifest(f"hash for {code.code_id} does not match its body")
    if len(parse_workload(code.body)) != code.line_count_n:
        raise MalformedManifest(f"line count for {code.code_id} does not match its body")
    manifest = Manifest.for_code(code)
    signed = verify_manifest(manifest, code.signature, owner.public_key, code.body)
    if as_system and not signed:
        raise SystemInstallRequiresValidSignature(code.code_id)
    # a signature that does not verify is dropped: the code is admitted as unsigned
    signature = code.signature if signed else None

    record = initial_record(code.code_id, as_system, owner.owner_trust, signed, store.params)
    installed = replace(code, owner_id=SYSTEM_ID if as_system else code.owner_id, signature=signature)
    store.add_code(manifest, code.body, signature, installed.owner_id, owner.id, record)
    return installed, record


def authorize_update(store: TrustStore, code_id: str, new_body: bytes,
                     new_manifest: Union[Manifest, bytes], signature: bytes) -> bool:
    """Replace the body of system-owned code iff the original owner signed it.

    History is kept across updates.
    """
    entry: InstallEntry = store.install_entry(code_id)
    if entry.owner_id != SYSTEM_ID:
        raise NotSystemOwned(code_id)
    original = store.principals.get(entry.original_owner)
    if original is None:
        raise UnknownOriginalOwner(entry.original_owner)
    if not verify_manifest(new_manifest, signature, original.public_key, new_body):
        return False
    manifest = Manifest.parse(_manifest_bytes(new_manifest))
    if manifest.code_id != code_id or manifest.owner_id != entry.original_owner:
        return False
    store.replace_code(manifest, new_body, signature)
    return True
