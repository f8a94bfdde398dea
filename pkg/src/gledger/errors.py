"""Rejection codes shared by the ledger, registry, docstore and contract engine."""

from __future__ import annotations


class Rejection(Exception):
    """An operation was refused. `code` is the stable machine-readable reason."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


def reject(code: str, detail: str = "") -> "Rejection":
    return Rejection(code, detail)
