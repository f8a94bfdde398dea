"""Pseudonymous accounts: Ed25519 keypairs with hash-derived addresses.

An account address is the SHA-256 of the raw public key, so any node can
recompute it and the ledger never needs to store real-world identity.
Key derivation from a 32-byte seed is deterministic (the seed is the
Ed25519 private scalar input), which keeps scenario runs replayable.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    PublicFormat,
)

from .canon import sha256

SEED_LEN = 32


@dataclass(frozen=True)
class Account:
    address: bytes  # 32 bytes, sha256(public_key)
    public_key: bytes  # 32 bytes, raw Ed25519

    @property
    def address_hex(self) -> str:
        return self.address.hex()


@dataclass(frozen=True)
class Keypair:
    account: Account
    seed: bytes  # private key material, held by the owner only

    @property
    def address(self) -> bytes:
        return self.account.address

    @property
    def address_hex(self) -> str:
        return self.account.address.hex()

    def sign(self, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(self.seed).sign(message)


def generate_account(seed: bytes) -> Keypair:
    """Derive the (account, private key) pair for a 32-byte seed."""
    if len(seed) != SEED_LEN:
        raise ValueError(f"seed must be {SEED_LEN} bytes, got {len(seed)}")
    private = Ed25519PrivateKey.from_private_bytes(seed)
    public = private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    return Keypair(account=Account(address=sha256(public), public_key=public), seed=seed)


def address_of(public_key: bytes) -> bytes:
    return sha256(public_key)


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False
