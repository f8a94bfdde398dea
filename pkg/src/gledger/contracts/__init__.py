"""Guarantee-case contract engine: states, event-sourced records, and command handling."""

from .states import CaseState, Pathway, TERMINAL_STATES, transition_relation, next_state
from .case import GuaranteeCase, case_from_opening, evolve, replay_case
from .engine import (
    Engine,
    EngineContext,
    compute_fee,
    compute_payout,
    certificate_plaintext,
    CERTIFICATE_POLICY,
    CONTRACT_OPS,
)

__all__ = [
    "CaseState",
    "Pathway",
    "TERMINAL_STATES",
    "transition_relation",
    "next_state",
    "GuaranteeCase",
    "case_from_opening",
    "evolve",
    "replay_case",
    "Engine",
    "EngineContext",
    "compute_fee",
    "compute_payout",
    "certificate_plaintext",
    "CERTIFICATE_POLICY",
    "CONTRACT_OPS",
]
