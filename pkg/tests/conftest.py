from __future__ import annotations

import pytest

from trustengine import (
    CodeUnit,
    KeyPair,
    Manifest,
    Principal,
    PrincipalKind,
    TrustEngine,
    TrustStore,
    install,
    sign_manifest,
)

HAPPY = "COMPUTE 1\nEXIT success\n"


def make_unit(code_id, owner, body, keys=None):
    body = body.encode() if isinstance(body, str) else body
    unit = CodeUnit.from_body(code_id, owner, body)
    if keys is None:
        return unit
    sig = sign_manifest(Manifest.for_code(unit), keys.private_key)
    return CodeUnit.from_body(code_id, owner, body, sig)


class Env:
    """A store with two principals and helpers to install code."""

    def __init__(self, root):
        self.root = root
        self.store = TrustStore(root)
        self.engine = TrustEngine(self.store)
        self.keys = {}
        self.add_principal("vendor", 0.5, PrincipalKind.VENDOR)
        self.add_principal("user", 0.5)

    def add_principal(self, pid, trust, kind=PrincipalKind.USER):
        keys = KeyPair.from_seed(f"test:{pid}")
        self.keys[pid] = keys
        self.store.add_principal(Principal(pid, keys.public_key, trust, kind))
        return keys

    def install(self, code_id, body=HAPPY, owner="vendor", signed=True, as_system=False):
        unit = make_unit(code_id, owner, body, self.keys[owner] if signed else None)
        return install(unit, self.store, as_system=as_system)

    def close(self):
        self.store.close()


@pytest.fixture
def env(tmp_path):
    e = Env(tmp_path / "store")
    yield e
    e.close()
