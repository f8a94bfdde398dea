"""Desk-scale credit-guarantee ledger and deterministic contract engine."""

__version__ = "0.1.0"
