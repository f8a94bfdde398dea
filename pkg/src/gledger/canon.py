"""Canonical serialization and hashing.

Every hash in the system is computed over these bytes, so the encoding must
be bit-exact across runs and implementations: sorted-key compact JSON,
UTF-8, integers only (floats are banned from ledger state; money is kept
in integer minor units).
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

ZERO_HASH = bytes(32)


class NotCanonical(ValueError):
    """Value cannot be canonically serialized (float, None, non-str key, ...)."""


def _check(value: Any) -> None:
    if isinstance(value, bool):
        return
    if isinstance(value, int):
        return
    if isinstance(value, str):
        return
    if isinstance(value, list):
        for item in value:
            _check(item)
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise NotCanonical(f"non-string map key: {key!r}")
            _check(item)
        return
    raise NotCanonical(f"non-representable value of type {type(value).__name__}: {value!r}")


def canonical_serialize(value: Any) -> bytes:
    """Encode maps/lists/strings/bools/ints as compact sorted-key JSON bytes.

    Keys sort bytewise ascending (code-point order equals UTF-8 byte order).
    Raises NotCanonical for floats, None, or non-string keys.
    """
    _check(value)
    text = json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return text.encode("utf-8")


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_value(value: Any) -> bytes:
    """SHA-256 of the canonical serialization."""
    return sha256(canonical_serialize(value))


def to_hex(digest: bytes) -> str:
    return digest.hex()


def from_hex(text: str) -> bytes:
    return bytes.fromhex(text)
