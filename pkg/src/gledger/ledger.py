"""Transactions and blocks: canonical forms, signing, hashing, file layout.

Transactions and blocks are plain dicts in canonical-serializable form, so
their hashes are well defined everywhere. A transaction is signed over the
canonical serialization of all fields except the signature. A block's hash
covers its header (height, prev_hash, proposer, state_root, tx_root);
finality votes sign that hash, and the transaction root covers the ordered
transaction hashes, so every byte of a persisted block is check-covered.

Chain persistence is one JSON line per block, genesis first.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .accounts import Keypair, address_of, verify_signature
from .canon import ZERO_HASH, canonical_serialize, hash_value, sha256
from .errors import Rejection

SYSTEM_ADDRESS = ZERO_HASH.hex()


# ---- payload builders ----

def transfer_payload(recipient_hex: str, amount: int, memo: str = "") -> dict[str, Any]:
    return {"kind": "transfer", "recipient": recipient_hex, "amount": amount, "memo": memo}


def call_payload(case_id: str, op: str, args: dict[str, Any] | None = None) -> dict[str, Any]:
    return {"kind": "call", "case_id": case_id, "op": op, "args": args or {}}


def admin_payload(op: str, **fields: Any) -> dict[str, Any]:
    payload = {"kind": "admin", "op": op}
    payload.update(fields)
    return payload


# ---- transactions ----

def signing_bytes(tx: dict[str, Any]) -> bytes:
    unsigned = {k: v for k, v in tx.items() if k != "signature"}
    return canonical_serialize(unsigned)


def sign_transaction(
    keypair: Keypair, nonce: int, payload: dict[str, Any], timestamp: int
) -> dict[str, Any]:
    """Assemble and sign a transaction for the keypair's account."""
    tx = {
        "nonce": nonce,
        "payload": payload,
        "public_key": keypair.account.public_key.hex(),
        "sender": keypair.address_hex,
        "timestamp": timestamp,
    }
    tx["signature"] = keypair.sign(signing_bytes(tx)).hex()
    return tx


def sign_as(keypair: Keypair, sender_hex: str, nonce: int, payload: dict, timestamp: int) -> dict:
    """Sign a transaction claiming `sender_hex`; rejected unless the key matches."""
    if keypair.address_hex != sender_hex:
        raise Rejection("KeyMismatch", "private key does not correspond to sender")
    return sign_transaction(keypair, nonce, payload, timestamp)


def system_transaction(nonce: int, payload: dict[str, Any], timestamp: int = 0) -> dict[str, Any]:
    # Genesis bootstrap only: the system sender has no key and is valid
    # solely inside block 0.
    return {
        "nonce": nonce,
        "payload": payload,
        "public_key": "",
        "sender": SYSTEM_ADDRESS,
        "timestamp": timestamp,
        "signature": "",
    }


def tx_hash(tx: dict[str, Any]) -> bytes:
    return hash_value(tx)


def signature_valid(tx: dict[str, Any]) -> bool:
    """Check the sender/public-key binding and the signature itself."""
    try:
        public_key = bytes.fromhex(tx["public_key"])
        signature = bytes.fromhex(tx["signature"])
        sender = bytes.fromhex(tx["sender"])
    except (KeyError, ValueError, TypeError):
        return False
    if address_of(public_key) != sender:
        return False
    return verify_signature(public_key, signing_bytes(tx), signature)


# ---- blocks ----

def tx_root(transactions: list[dict[str, Any]]) -> bytes:
    return sha256(b"".join(tx_hash(tx) for tx in transactions))


def block_header(block: dict[str, Any]) -> dict[str, Any]:
    return {
        "height": block["height"],
        "prev_hash": block["prev_hash"],
        "proposer": block["proposer"],
        "state_root": block["state_root"],
        "tx_root": block["tx_root"],
    }


def block_hash(block: dict[str, Any]) -> bytes:
    return hash_value(block_header(block))


def make_block(
    height: int,
    prev_hash_hex: str,
    proposer_hex: str,
    transactions: list[dict[str, Any]],
    state_root_hex: str,
) -> dict[str, Any]:
    return {
        "height": height,
        "prev_hash": prev_hash_hex,
        "proposer": proposer_hex,
        "state_root": state_root_hex,
        "tx_root": tx_root(transactions).hex(),
        "transactions": transactions,
        "finality_votes": [],
    }


def add_vote(block: dict[str, Any], validator_hex: str, signature_hex: str) -> None:
    block["finality_votes"].append([validator_hex, signature_hex])
    block["finality_votes"].sort()


def vote_threshold(validator_count: int) -> int:
    """Supermajority finality: ceil(2n/3) votes."""
    return (2 * validator_count + 2) // 3


# ---- persistence ----

def save_chain(blocks: list[dict[str, Any]], path: Path) -> None:
    with path.open("wb") as fh:
        for block in blocks:
            fh.write(canonical_serialize(block) + b"\n")


def load_chain(path: Path) -> list[dict[str, Any]]:
    blocks = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                blocks.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise Rejection("ParseError", f"chain line {lineno + 1}: {exc}")
    return blocks
