import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustengine import (
    KeyPair,
    Manifest,
    TrustLevel,
    authorize_update,
    canonical_hash,
    sign_manifest,
    verify_manifest,
)
from trustengine.errors import (
    DuplicateCode,
    MalformedManifest,
    NotSystemOwned,
    SystemInstallRequiresValidSignature,
    UnknownOwner,
)

from conftest import make_unit

ident = st.from_regex(r"[A-Za-z0-9._-]{1,20}", fullmatch=True)
manifests = st.builds(
    Manifest,
    ident,
    ident,
    st.binary(max_size=64).map(canonical_hash),
    st.integers(min_value=1, max_value=10**6),
    st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False),
)


def test_sha256_vectors():
    assert canonical_hash(b"") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert canonical_hash(b"abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    assert canonical_hash(b"abc") != canonical_hash(b"abd")


def test_manifest_text_layout():
    m = Manifest("app", "vendor", canonical_hash(b""), 3, 1.5)
    assert m.serialize() == (
        b"id: app\nowner: vendor\n"
        b"hash: e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855\n"
        b"lines: 3\nk: 1.5\n"
    )


@given(manifests)
def test_manifest_round_trip(m):
    text = m.serialize()
    assert Manifest.parse(text) == m
    assert Manifest.parse(text).serialize() == text


@pytest.mark.parametrize("mutate", [
    lambda t: t.replace(b"\n", b"\r\n"),
    lambda t: t.rstrip(b"\n"),
    lambda t: t + b"extra: 1\n",
    lambda t: t.replace(b"k: 1.5", b"k: 1.50"),
    lambda t: t.replace(b"lines: 3", b"lines: 03"),
    lambda t: t.replace(b"id: app", b"id:  app"),
    lambda t: t.replace(b"owner: vendor\n", b"owner: vendor \n"),
])
def test_non_canonical_manifests_rejected(mutate):
    text = Manifest("app", "vendor", canonical_hash(b""), 3, 1.5).serialize()
    with pytest.raises(MalformedManifest):
        Manifest.parse(mutate(text))


def test_sign_verify_examples():
    a, b = KeyPair.from_seed("a"), KeyPair.from_seed("b")
    body = b"COMPUTE 1\nEXIT success\n"
    m = Manifest("app", "vendor", canonical_hash(body), 2, 1.0)
    sig = sign_manifest(m, a.private_key)
    assert verify_manifest(m, sig, a.public_key)
    assert verify_manifest(m, sig, a.public_key, body)
    assert not verify_manifest(m, sig, b.public_key)
    assert not verify_manifest(m, sig, a.public_key, body + b"#")
    assert not verify_manifest(m, None, a.public_key)
    flipped = bytearray(m.serialize())
    flipped[4] ^= 0x01
    assert not verify_manifest(bytes(flipped), sig, a.public_key)


def test_sign_rejects_non_canonical():
    with pytest.raises(MalformedManifest):
        sign_manifest(b"id: x\n", KeyPair.from_seed("a").private_key)


def test_verify_never_raises_on_garbage():
    assert not verify_manifest(b"\xff\xfe", b"sig", b"short-key")
    assert not verify_manifest(b"", b"x" * 64, b"\x00" * 32)


@settings(max_examples=60)
@given(manifests, st.data())
def test_any_single_byte_perturbation_fails(m, data):
    keys = KeyPair.from_seed("prop")
    other = KeyPair.from_seed("other")
    text = m.serialize()
    sig = sign_manifest(m, keys.private_key)
    assert verify_manifest(m, sig, keys.public_key)
    assert not verify_manifest(m, sig, other.public_key)

    i = data.draw(st.integers(0, len(text) - 1))
    bit = data.draw(st.integers(1, 255))
    bad = bytearray(text)
    bad[i] ^= bit
    assert not verify_manifest(bytes(bad), sig, keys.public_key)

    j = data.draw(st.integers(0, len(sig) - 1))
    bad_sig = bytearray(sig)
    bad_sig[j] ^= bit
    assert not verify_manifest(m, bytes(bad_sig), keys.public_key)


def test_key_files_round_trip(tmp_path):
    from trustengine.integrity import read_hex_file

    keys = KeyPair.from_seed("file")
    priv, pub = keys.save(tmp_path / "alice")
    assert priv.read_text().strip() == keys.private_key.hex()
    assert KeyPair.from_private(read_hex_file(priv)) == keys
    assert read_hex_file(pub) == keys.public_key
    assert len(keys.private_key) == len(keys.public_key) == 32


class TestInstall:
    def test_system_install_transfers_ownership(self, env):
        unit, record = env.install("boot", as_system=True)
        assert unit.owner_id == "system"
        assert record.functional_level is TrustLevel.OPERATIONAL
        assert record.effective_level is TrustLevel.OPERATIONAL
        assert env.store.install_entry("boot").original_owner == "vendor"
        assert record.transactional_score == 0.5

    def test_signed_user_code_is_verifiable(self, env):
        env.add_principal("alice", 0.7)
        unit, record = env.install("app", owner="alice")
        assert unit.owner_id == "alice"
        assert record.functional_level is TrustLevel.VERIFIABLE
        assert record.effective_level is TrustLevel.VERIFIABLE
        assert record.transactional_score == 0.7

    def test_unsigned_code_starts_untrustable(self, env):
        _, record = env.install("anon", owner="user", signed=False)
        assert record.effective_level is TrustLevel.UNTRUSTABLE
        assert env.engine.evaluate("anon").mode.value == "Sandbox"

    def test_bad_signature_is_admitted_as_unsigned(self, env):
        unit = make_unit("app", "user", "COMPUTE 1\nEXIT success\n", env.keys["vendor"])
        from trustengine import install

        installed, record = install(unit, env.store)
        assert installed.signature is None
        assert record.effective_level is TrustLevel.UNTRUSTABLE

    def test_duplicate_rejected(self, env):
        env.install("app")
        with pytest.raises(DuplicateCode):
            env.install("app")
        with pytest.raises(DuplicateCode):
            env.install("app", as_system=True)

    def test_unknown_owner(self, env):
        from trustengine import install

        with pytest.raises(UnknownOwner):
            install(make_unit("app", "nobody", "EXIT success\n"), env.store)

    def test_system_install_requires_signature(self, env):
        with pytest.raises(SystemInstallRequiresValidSignature):
            env.install("boot", signed=False, as_system=True)
        unit = make_unit("boot", "user", "EXIT success\n", env.keys["vendor"])
        from trustengine import install

        with pytest.raises(SystemInstallRequiresValidSignature):
            install(unit, env.store, as_system=True)
        assert not env.store.has_code("boot")

    def test_header_must_match_body(self, env):
        from dataclasses import replace

        from trustengine import install

        unit = make_unit("app", "vendor", "COMPUTE 1\nEXIT success\n")
        with pytest.raises(MalformedManifest):
            install(replace(unit, body=b"EXIT success\n"), env.store)
        with pytest.raises(MalformedManifest):
            install(replace(unit, line_count_n=5), env.store)


class TestAuthorizeUpdate:
    def _update(self, env, body, signer, code_id="boot", owner="vendor"):
        unit = make_unit(code_id, owner, body)
        m = Manifest.for_code(unit)
        return m, sign_manifest(m, env.keys[signer].private_key)

    def test_original_vendor_update_accepted(self, env):
        env.install("boot", as_system=True)
        env.engine.run("boot")
        body = b"COMPUTE 2\nEXIT success\n"
        m, sig = self._update(env, body, "vendor")
        assert authorize_update(env.store, "boot", body, m, sig) is True
        assert env.store.load_code("boot").body == body
        assert env.store.aggregate("boot").total == 1  # history retained
        assert env.engine.run("boot").outcome.value == "Success"

    def test_other_signer_rejected(self, env):
        env.install("boot", as_system=True)
        body = b"COMPUTE 2\nEXIT success\n"
        m, sig = self._update(env, body, "user")
        before = env.store.load_code("boot")
        assert authorize_update(env.store, "boot", body, m, sig) is False
        assert env.store.load_code("boot") == before

    def test_manifest_must_match_new_body_and_id(self, env):
        env.install("boot", as_system=True)
        env.install("other", as_system=True)
        m, sig = self._update(env, b"COMPUTE 2\nEXIT success\n", "vendor")
        assert authorize_update(env.store, "boot", b"COMPUTE 3\nEXIT success\n", m, sig) is False
        m2, sig2 = self._update(env, b"EXIT success\n", "vendor", code_id="other")
        assert authorize_update(env.store, "boot", b"EXIT success\n", m2, sig2) is False

    def test_not_system_owned(self, env):
        env.install("app")
        m, sig = self._update(env, b"EXIT success\n", "vendor", code_id="app")
        with pytest.raises(NotSystemOwned):
            authorize_update(env.store, "app", b"EXIT success\n", m, sig)
