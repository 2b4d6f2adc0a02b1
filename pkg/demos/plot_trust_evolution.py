"""
Trust evolution under repeated runs
===================================

Install two pieces of signed code with the same owner, run one that always
succeeds and one that always crashes, and watch their levels move apart.
"""

import shutil
import tempfile
from pathlib import Path

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

root = Path(tempfile.mkdtemp()) / "store"
store = TrustStore(root)

# one vendor with a middling reputation
keys = KeyPair.from_seed("demo-vendor")
store.add_principal(Principal("acme", keys.public_key, 0.5, PrincipalKind.VENDOR))


def signed(code_id, body):
    unit = CodeUnit.from_body(code_id, "acme", body.encode())
    sig = sign_manifest(Manifest.for_code(unit), keys.private_key)
    return CodeUnit.from_body(code_id, "acme", body.encode(), sig)


install(signed("steady", "COMPUTE 4\nWRITE user log\nEXIT success\n"), store)
install(signed("flaky", "READ sandbox input\nRAISE_UNHANDLED\nEXIT success\n"), store)

engine = TrustEngine(store)

# every run is recorded in history and moves the score; the level can
# shift by at most one position per run
for run in range(1, 61):
    good = engine.run("steady")
    bad = engine.run("flaky")
    if good.record_before.effective_level != good.record_after.effective_level or run in (1, 60):
        print(f"run {run:3d} steady: {good.record_after.effective_level.label:12s} "
              f"score={good.score_after:.4f}")
    if bad.record_before.effective_level != bad.record_after.effective_level:
        print(f"run {run:3d} flaky : {bad.record_after.effective_level.label:12s} "
              f"score={bad.score_after:.4f}")

# once Denied the verdict is final and nothing more is written
print("flaky verdict now:", engine.evaluate("flaky"))
print("history length:", store.history.last_seq)
store.close()
shutil.rmtree(root.parent)
