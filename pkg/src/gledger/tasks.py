"""Pending-task computation: which operations each actor can run right now.

A task is listed iff submitting it immediately would be accepted, which is
established the honest way: every candidate operation is trial-run against a
clone of the current state with concrete suggested arguments. The service
inbox and the console buttons are both built from this list, so no rendered
action can be a fabrication.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator

from .contracts.case import GuaranteeCase
from .contracts.engine import Engine, certificate_cid_for, compute_payout
from .contracts.states import CaseState
from .errors import Rejection
from .node import Node
from .roles import Role


@dataclass
class TaskItem:
    case_id: str
    state: str
    awaited_action: str
    since: int
    arguments: dict[str, Any]

    def to_json(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "state": self.state,
            "awaited_action": self.awaited_action,
            "since": self.since,
            "arguments": self.arguments,
        }


def enabled_actions(node: Node, address_hex: str, time: int | None = None) -> list[TaskItem]:
    """All (case, operation) pairs currently enabled for the actor, with
    suggested arguments that are guaranteed to be accepted as-is."""
    state = node.state
    role = state.active_role(address_hex)
    if role is None:
        return []
    time = time if time is not None else _next_time(node)
    engine = Engine(node.ctx)
    tasks: list[TaskItem] = []
    for case_id in sorted(state.cases):
        case = state.cases[case_id]
        for op, args in _candidates(node, case, address_hex, role):
            # decide() never mutates the state it reads, so probing is cheap
            try:
                engine.decide(state, address_hex, op, dict(args, case_id=case_id), time)
            except Rejection:
                continue
            tasks.append(
                TaskItem(
                    case_id=case_id,
                    state=case.state.value,
                    awaited_action=op,
                    since=case.last_event_time(),
                    arguments=args,
                )
            )
        fee_task = _fee_task(case, address_hex)
        if fee_task is not None:
            tasks.append(fee_task)
    return tasks


def _next_time(node: Node) -> int:
    last = 0
    for block in node.blocks:
        for tx in block["transactions"]:
            last = max(last, tx["timestamp"])
    return last + 1


def _fee_task(case: GuaranteeCase, address_hex: str) -> TaskItem | None:
    """The fee ValueTransfer awaited from the payer while the case sits in FeePending."""
    if case.state != CaseState.FEE_PENDING or case.fee is None:
        return None
    if case.fee["payer"] != address_hex or case.fee["paid"]:
        return None
    return TaskItem(
        case_id=case.case_id,
        state=case.state.value,
        awaited_action="pay_fee",
        since=case.last_event_time(),
        arguments={"amount": case.fee["fee_amount"], "to": case.cgi, "memo": case.case_id},
    )


def _candidates(
    node: Node, case: GuaranteeCase, address_hex: str, role: Role
) -> Iterator[tuple[str, dict[str, Any]]]:
    """Candidate operations with valid-by-construction suggested arguments.

    The trial run in enabled_actions is authoritative; this only has to
    propose sensible defaults for each party.
    """
    is_borrower = address_hex == case.borrower
    is_bank = address_hex == case.bank
    is_cgi = address_hex == case.cgi

    if is_borrower:
        missing = case.kyc.get("missing", [])
        yield "submit_application", {"provided_fields": list(missing), "application_cid": ""}
        yield "auto_submit_loan_request", {}
    if is_bank:
        yield "bank_evaluate_loan", {"decision": "accept"}
        yield "bank_request_guarantee", {}
        yield "risk_line_step", _risk_line_args(case, "bank")
        yield "disburse_loan", {}
        yield "record_payment_event", _payment_args(case)
        yield "trigger_default", {}
        yield "file_claim", _claim_args(case)
        yield "dispute_step", {"action": "open", "evidence_cids": []}
        yield "enforce_and_payout", {}
    if is_cgi:
        yield "cgi_decide_guarantee", {"decision": "approve"}
        yield "grant_to_bank", _grant_args(node, case)
        yield "risk_line_step", _risk_line_args(case, "cgi")
        yield "verify_fee_payment", {}
        yield "issue_certificate", _certificate_args(node, case)
        yield "trigger_default", {}
        yield "dispute_step", {"action": "open", "evidence_cids": []}
        yield "dispute_step", {"action": "rule", "ruling": "Upheld", "arbiter": "cgi"}
        yield "enforce_and_payout", {}
    if role == Role.AUDITOR and not (is_borrower or is_bank or is_cgi):
        yield "dispute_step", {"action": "rule", "ruling": "Upheld", "arbiter": "auditor"}


def _risk_line_args(case: GuaranteeCase, side: str) -> dict[str, Any]:
    line = case.risk_line
    if case.state == CaseState.RISK_LINE_NEGOTIATION and line is not None and line["proposed_by"] != side:
        return {"action": "accept"}
    return {"action": "propose", "coverage_bps": 8000, "seniority": "FirstDemand", "cap": case.principal}


def _payment_args(case: GuaranteeCase) -> dict[str, Any]:
    outstanding = case.loan["outstanding"] if case.loan else case.principal
    due = next((amount for _, amount in case.schedule if amount <= outstanding), outstanding)
    return {"event": "regular", "amount": max(1, min(due, outstanding))}


def _claim_args(case: GuaranteeCase) -> dict[str, Any]:
    if case.risk_line is None or case.loan is None:
        return {"claimed_amount": 1, "recovery_action_cids": []}
    amount = compute_payout(
        case.risk_line["coverage_bps"],
        case.risk_line["cap"],
        case.loan["outstanding"],
        case.loan["outstanding"],
    )
    return {"claimed_amount": max(1, amount), "recovery_action_cids": []}


def _grant_args(node: Node, case: GuaranteeCase) -> dict[str, Any]:
    if not case.application_cid:
        return {"content_id": "", "shared_cid": ""}
    try:
        shared = node.docstore.restore_with_policy(
            bytes.fromhex(case.application_cid), [Role.BANK], node.keyring
        )
    except Rejection:
        return {"content_id": case.application_cid, "shared_cid": ""}
    return {"content_id": case.application_cid, "shared_cid": shared.hex()}


def _certificate_args(node: Node, case: GuaranteeCase) -> dict[str, Any]:
    if case.risk_line is None:
        return {"certificate_cid": ""}
    cid = certificate_cid_for(case, node.docstore, node.keyring)
    return {"certificate_cid": cid.hex()}


def case_summary(case: GuaranteeCase) -> dict[str, Any]:
    """Read-only case digest for auditors and the government agency."""
    return {
        "case_id": case.case_id,
        "pathway": case.pathway.value,
        "state": case.state.value,
        "principal": case.principal,
        "since": case.last_event_time(),
        "events": len(case.event_log),
    }
