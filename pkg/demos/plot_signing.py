"""
Signing, installing and tampering
=================================

Walk through the manifest format, sign it, install the code as system
software and then corrupt the stored body.
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
    authorize_update,
    install,
    sign_manifest,
    verify_manifest,
)

keys = KeyPair.from_seed("demo-os-vendor")
body = b"READ system config\nWRITE system cache\nEXIT success\n"

# the manifest binds the id, owner and body hash in a fixed text layout
unit = CodeUnit.from_body("bootloader", "osvendor", body)
manifest = Manifest.for_code(unit)
print(manifest.serialize().decode())

sig = sign_manifest(manifest, keys.private_key)
print("signature verifies:", verify_manifest(manifest, sig, keys.public_key, body))

# a system install hands ownership to the system principal and starts at Operational
workdir = Path(tempfile.mkdtemp())
store = TrustStore(workdir / "store")
store.add_principal(Principal("osvendor", keys.public_key, 0.9, PrincipalKind.VENDOR))
installed, record = install(CodeUnit.from_body("bootloader", "osvendor", body, sig), store,
                            as_system=True)
print("owner:", installed.owner_id, "level:", record.effective_level.label)

engine = TrustEngine(store)
print("verdict:", engine.evaluate("bootloader"), engine.run("bootloader").outcome.value)

# only the original owner may replace system code
intruder = KeyPair.from_seed("intruder")
new_body = b"WRITE system cache\nEXIT success\n"
new_manifest = Manifest.for_code(CodeUnit.from_body("bootloader", "osvendor", new_body))
print("intruder update accepted:",
      authorize_update(store, "bootloader", new_body, new_manifest,
                       sign_manifest(new_manifest, intruder.private_key)))

# flip one byte of the stored body: the next run fails integrity and
# the code loses one level
path = store.code_path("bootloader", ".etw")
data = bytearray(path.read_bytes())
data[0] ^= 0x20
path.write_bytes(bytes(data))
report = engine.run("bootloader")
print("after tampering:", report.outcome.value, report.record_after.effective_level.label)
store.close()
shutil.rmtree(workdir)
