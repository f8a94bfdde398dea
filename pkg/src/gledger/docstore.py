"""Content-addressed document store with role-keyed encryption envelopes.

Documents live off-chain; the chain carries only their content ids. Each
document is encrypted under a fresh per-document key, and one wrapped copy
of that key is stored per allowed role, encrypted under the role's shared
key. Grants are therefore decoupled from individuals: admitting a new actor
of an allowed role requires no re-encryption.

Trust boundary: the role keys are a deliberate simplification of
attribute-based encryption. Confidentiality holds against this module's
interface, not against an adversary who already holds a role key it should
not have.

The per-document key is derived as sha256(plaintext || canonical policy),
so storing identical content under an identical policy is idempotent and
replayable. Envelope format (canonical JSON): {policy, plaintext_hash,
wrapped_keys: {role: hex}, ciphertext: hex, nonce: hex}.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Protocol

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .canon import canonical_serialize, sha256
from .errors import Rejection
from .roles import Role

NONCE_LEN = 12


class RegistryView(Protocol):
    def active_role(self, address: bytes) -> Optional[Role]: ...


class RoleKeyring:
    """Shared symmetric key per role, derived deterministically from a network seed."""

    def __init__(self, keys: dict[str, bytes]):
        self.keys = keys

    @classmethod
    def derive(cls, network_seed: bytes, roles: Iterable[Role] = tuple(Role)) -> "RoleKeyring":
        return cls({r.value: sha256(network_seed + b"|role-key|" + r.value.encode()) for r in roles})

    def key_for(self, role: Role | str) -> bytes:
        name = role.value if isinstance(role, Role) else role
        if name not in self.keys:
            raise Rejection("MissingRoleKey", name)
        return self.keys[name]

    def has(self, role: Role | str) -> bool:
        name = role.value if isinstance(role, Role) else role
        return name in self.keys


def _policy_list(policy: Iterable[Role | str]) -> list[str]:
    names = sorted({r.value if isinstance(r, Role) else str(r) for r in policy})
    for name in names:
        Role(name)  # raises on unknown role names
    return names


def _doc_key(plaintext: bytes, policy_names: list[str]) -> bytes:
    return sha256(plaintext + b"|" + canonical_serialize(policy_names))


def _wrap_nonce(content_nonce: bytes, role_name: str) -> bytes:
    # Role keys are reused across documents, so wrap nonces must be unique per
    # (document, role). The content nonce is doc-key-derived and public in the
    # envelope, which lets readers recompute the wrap nonce before unwrapping.
    return sha256(content_nonce + b"|wrap|" + role_name.encode())[:NONCE_LEN]


def build_envelope(plaintext: bytes, policy: Iterable[Role | str], keyring: RoleKeyring) -> bytes:
    """Assemble the canonical encrypted envelope for `plaintext` under `policy`."""
    names = _policy_list(policy)
    if not names:
        raise Rejection("EmptyPolicy")
    for name in names:
        if not keyring.has(name):
            raise Rejection("MissingRoleKey", name)
    policy_bytes = canonical_serialize(names)
    doc_key = _doc_key(plaintext, names)
    nonce = sha256(doc_key + b"|content-nonce")[:NONCE_LEN]
    ciphertext = AESGCM(doc_key).encrypt(nonce, plaintext, policy_bytes)
    wrapped = {
        name: AESGCM(keyring.key_for(name)).encrypt(_wrap_nonce(nonce, name), doc_key, name.encode()).hex()
        for name in names
    }
    return canonical_serialize(
        {
            "ciphertext": ciphertext.hex(),
            "nonce": nonce.hex(),
            "plaintext_hash": sha256(plaintext).hex(),
            "policy": names,
            "wrapped_keys": wrapped,
        }
    )


def open_envelope(envelope: bytes, role: Role | str, keyring: RoleKeyring) -> bytes:
    """Decrypt an envelope with the given role's key, verifying the plaintext hash."""
    try:
        fields = json.loads(envelope)
        names = list(fields["policy"])
        role_name = role.value if isinstance(role, Role) else role
        if role_name not in names:
            raise Rejection("RoleNotInPolicy", role_name)
        wrapped = bytes.fromhex(fields["wrapped_keys"][role_name])
        nonce = bytes.fromhex(fields["nonce"])
        ciphertext = bytes.fromhex(fields["ciphertext"])
    except Rejection:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise Rejection("Tampered", f"malformed envelope: {exc}")
    role_key = keyring.key_for(role_name)
    policy_bytes = canonical_serialize(sorted(names))
    try:
        doc_key = AESGCM(role_key).decrypt(_wrap_nonce(nonce, role_name), wrapped, role_name.encode())
        plaintext = AESGCM(doc_key).decrypt(nonce, ciphertext, policy_bytes)
    except InvalidTag:
        raise Rejection("Tampered", "decryption failed")
    if sha256(plaintext).hex() != fields["plaintext_hash"]:
        raise Rejection("Tampered", "plaintext hash mismatch")
    return plaintext


class DocStore:
    """Keyed object store: content id (sha256 of envelope) -> envelope bytes.

    Optionally backed by a directory with one file per document, named by the
    hex content id.
    """

    def __init__(self, root: Path | None = None):
        self.root = root
        self._mem: dict[str, bytes] = {}
        if root is not None:
            root.mkdir(parents=True, exist_ok=True)
            for path in root.iterdir():
                if path.is_file():
                    self._mem[path.name] = path.read_bytes()

    def put(self, plaintext: bytes, policy: Iterable[Role | str], keyring: RoleKeyring) -> bytes:
        """Store `plaintext` readable by `policy` roles; returns the content id."""
        envelope = build_envelope(plaintext, policy, keyring)
        cid = sha256(envelope)
        self._store(cid, envelope)
        return cid

    def _store(self, cid: bytes, envelope: bytes) -> None:
        self._mem[cid.hex()] = envelope
        if self.root is not None:
            (self.root / cid.hex()).write_bytes(envelope)

    def exists(self, cid: bytes) -> bool:
        return cid.hex() in self._mem

    def raw_envelope(self, cid: bytes) -> bytes:
        try:
            return self._mem[cid.hex()]
        except KeyError:
            raise Rejection("NotFound", cid.hex())

    def get(
        self,
        cid: bytes,
        requester: bytes,
        registry: RegistryView,
        keyring: RoleKeyring,
    ) -> bytes:
        """Fetch and decrypt a document for an admitted requester.

        The envelope is re-hashed against the content id and the plaintext
        against its recorded hash, so any mutation surfaces as Tampered.
        """
        envelope = self.raw_envelope(cid)
        role = registry.active_role(requester)
        if role is None:
            raise Rejection("NotAdmitted", requester.hex())
        if sha256(envelope) != cid:
            raise Rejection("Tampered", "envelope hash does not match content id")
        return open_envelope(envelope, role, keyring)

    def policy_of(self, cid: bytes) -> list[str]:
        envelope = self.raw_envelope(cid)
        try:
            return list(json.loads(envelope)["policy"])
        except (KeyError, ValueError, TypeError):
            raise Rejection("Tampered", "malformed envelope")

    def restore_with_policy(
        self, cid: bytes, extra_roles: Iterable[Role | str], keyring: RoleKeyring
    ) -> bytes:
        """Re-store a document under policy union extra_roles; returns the new id.

        The original document is left untouched (content addressing makes
        policies immutable); callers record the new id.
        """
        envelope = self.raw_envelope(cid)
        if sha256(envelope) != cid:
            raise Rejection("Tampered", "envelope hash does not match content id")
        old_policy = self.policy_of(cid)
        reader = next((name for name in old_policy if keyring.has(name)), None)
        if reader is None:
            raise Rejection("MissingRoleKey", "no keyring role can open the original")
        plaintext = open_envelope(envelope, reader, keyring)
        new_policy = _policy_list(list(old_policy) + [r.value if isinstance(r, Role) else str(r) for r in extra_roles])
        return self.put(plaintext, new_policy, keyring)

    # test hook: overwrite stored bytes in place to simulate tampering
    def corrupt(self, cid: bytes, envelope: bytes) -> None:
        self._store(cid, envelope)
