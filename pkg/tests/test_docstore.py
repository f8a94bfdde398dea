"""Content addressing, role-keyed envelopes, tamper detection, grant decoupling."""

import json

import pytest

from gledger.canon import sha256
from gledger.docstore import DocStore, RoleKeyring, build_envelope, open_envelope
from gledger.errors import Rejection
from gledger.roles import Role


class FakeRegistry:
    def __init__(self, roles: dict[bytes, Role]):
        self.roles = roles

    def active_role(self, address: bytes):
        return self.roles.get(address)


@pytest.fixture
def keyring():
    return RoleKeyring.derive(b"\x05" * 32)


@pytest.fixture
def store():
    return DocStore()


CGI_ADDR = b"\x01" * 32
BANK_ADDR = b"\x02" * 32
OUTSIDER = b"\x03" * 32


@pytest.fixture
def registry():
    return FakeRegistry({CGI_ADDR: Role.CGI, BANK_ADDR: Role.BANK})


def test_put_get_roundtrip(store, keyring, registry):
    cid = store.put(b"dossier bytes", [Role.CGI], keyring)
    assert store.get(cid, CGI_ADDR, registry, keyring) == b"dossier bytes"


def test_put_is_idempotent(store, keyring):
    a = store.put(b"same content", [Role.CGI, Role.BORROWER], keyring)
    b = store.put(b"same content", [Role.BORROWER, Role.CGI], keyring)
    assert a == b


def test_cid_is_hash_of_envelope(store, keyring):
    cid = store.put(b"x", [Role.CGI], keyring)
    assert sha256(store.raw_envelope(cid)) == cid


def test_empty_policy_rejected(store, keyring):
    with pytest.raises(Rejection) as err:
        store.put(b"x", [], keyring)
    assert err.value.code == "EmptyPolicy"


def test_missing_role_key(store):
    thin = RoleKeyring({"CGI": b"\x09" * 32})
    with pytest.raises(Rejection) as err:
        store.put(b"x", [Role.CGI, Role.BANK], thin)
    assert err.value.code == "MissingRoleKey"


def test_role_not_in_policy_denied(store, keyring, registry):
    cid = store.put(b"cgi only", [Role.CGI], keyring)
    with pytest.raises(Rejection) as err:
        store.get(cid, BANK_ADDR, registry, keyring)
    assert err.value.code == "RoleNotInPolicy"


def test_unadmitted_requester_denied(store, keyring, registry):
    cid = store.put(b"cgi only", [Role.CGI], keyring)
    with pytest.raises(Rejection) as err:
        store.get(cid, OUTSIDER, registry, keyring)
    assert err.value.code == "NotAdmitted"


def test_not_found(store, keyring, registry):
    with pytest.raises(Rejection) as err:
        store.get(b"\x00" * 32, CGI_ADDR, registry, keyring)
    assert err.value.code == "NotFound"


def test_every_single_byte_mutation_detected(store, keyring, registry):
    cid = store.put(b"sensitive", [Role.CGI], keyring)
    envelope = bytearray(store.raw_envelope(cid))
    for index in range(0, len(envelope), max(1, len(envelope) // 64)):
        corrupted = bytearray(envelope)
        corrupted[index] ^= 0x01
        store.corrupt(cid, bytes(corrupted))
        with pytest.raises(Rejection) as err:
            store.get(cid, CGI_ADDR, registry, keyring)
        assert err.value.code == "Tampered"
    store.corrupt(cid, bytes(envelope))
    assert store.get(cid, CGI_ADDR, registry, keyring) == b"sensitive"


def test_wrapped_key_count_matches_policy(store, keyring):
    cid = store.put(b"multi", [Role.CGI, Role.BANK, Role.BORROWER], keyring)
    fields = json.loads(store.raw_envelope(cid))
    assert sorted(fields["wrapped_keys"]) == sorted(fields["policy"])
    assert len(fields["wrapped_keys"]) == 3


def test_grant_decoupling_new_bank_reads_without_reencryption(store, keyring):
    """Role keys, not per-individual keys: a newly admitted bank actor can
    open every {...,Bank} document that existed before its admission."""
    cid = store.put(b"shared later", [Role.CGI, Role.BANK], keyring)
    envelope_before = store.raw_envelope(cid)
    new_bank = b"\x77" * 32
    registry = FakeRegistry({new_bank: Role.BANK})
    assert store.get(cid, new_bank, registry, keyring) == b"shared later"
    assert store.raw_envelope(cid) == envelope_before


def test_restore_with_policy_preserves_original(store, keyring, registry):
    original = store.put(b"financials", [Role.CGI], keyring)
    shared = store.restore_with_policy(original, [Role.BANK], keyring)
    assert shared != original
    assert store.get(shared, BANK_ADDR, registry, keyring) == b"financials"
    with pytest.raises(Rejection):
        store.get(original, BANK_ADDR, registry, keyring)


def test_envelope_format_fields(keyring):
    envelope = json.loads(build_envelope(b"doc", [Role.CGI], keyring))
    assert sorted(envelope) == ["ciphertext", "nonce", "plaintext_hash", "policy", "wrapped_keys"]
    assert envelope["plaintext_hash"] == sha256(b"doc").hex()


def test_open_envelope_checks_plaintext_hash(keyring):
    envelope = json.loads(build_envelope(b"doc", [Role.CGI], keyring))
    envelope["plaintext_hash"] = sha256(b"other").hex()
    from gledger.canon import canonical_serialize

    with pytest.raises(Rejection) as err:
        open_envelope(canonical_serialize(envelope), Role.CGI, keyring)
    assert err.value.code == "Tampered"


def test_directory_persistence(tmp_path, keyring, registry):
    store = DocStore(tmp_path / "docs")
    cid = store.put(b"persisted", [Role.CGI], keyring)
    reloaded = DocStore(tmp_path / "docs")
    assert reloaded.get(cid, CGI_ADDR, registry, keyring) == b"persisted"
