"""Event-sourced guarantee case records.

A case is fully determined by its event log: `case_from_opening` builds the
initial record from the opening event and `evolve` folds every later event
in. The engine only ever mutates cases through these two functions, so
replaying a stored log byte-for-byte reproduces the stored case.

Evolution is context-free: every event record carries whatever data its
application needs (eligibility results, computed fees, rulings), which keeps
the reducer pure and the log self-contained.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any

from ..errors import Rejection
from . import states as st
from .states import CaseState, Pathway


@dataclass
class GuaranteeCase:
    case_id: str
    pathway: Pathway
    state: CaseState
    borrower: str  # address hex
    bank: str
    cgi: str
    application_cid: str
    principal: int
    schedule: list[list[int]]  # [due logical time, amount]
    ruleset_hash: str
    kyc: dict[str, Any]
    eligibility: dict[str, Any] | None = None
    risk_line: dict[str, Any] | None = None
    fee: dict[str, Any] | None = None
    certificate_cid: str | None = None
    loan: dict[str, Any] | None = None
    claim: dict[str, Any] | None = None
    financial_grants: dict[str, str] = field(default_factory=dict)
    closure_note: str | None = None
    event_log: list[dict[str, Any]] = field(default_factory=list)

    def parties(self) -> dict[str, str]:
        return {"borrower": self.borrower, "bank": self.bank, "cgi": self.cgi}

    def last_event_time(self) -> int:
        return self.event_log[-1]["time"] if self.event_log else 0

    def to_state(self) -> dict[str, Any]:
        """Canonical-serializable snapshot; optional fields are omitted when absent."""
        out: dict[str, Any] = {
            "case_id": self.case_id,
            "pathway": self.pathway.value,
            "state": self.state.value,
            "borrower": self.borrower,
            "bank": self.bank,
            "cgi": self.cgi,
            "application_cid": self.application_cid,
            "principal": self.principal,
            "schedule": self.schedule,
            "ruleset_hash": self.ruleset_hash,
            "kyc": self.kyc,
            "financial_grants": self.financial_grants,
            "event_log": self.event_log,
        }
        for name in ("eligibility", "risk_line", "fee", "certificate_cid", "loan", "claim", "closure_note"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_state(cls, data: dict[str, Any]) -> "GuaranteeCase":
        return cls(
            case_id=data["case_id"],
            pathway=Pathway(data["pathway"]),
            state=CaseState(data["state"]),
            borrower=data["borrower"],
            bank=data["bank"],
            cgi=data["cgi"],
            application_cid=data["application_cid"],
            principal=data["principal"],
            schedule=[list(entry) for entry in data["schedule"]],
            ruleset_hash=data["ruleset_hash"],
            kyc=copy.deepcopy(data["kyc"]),
            eligibility=copy.deepcopy(data.get("eligibility")),
            risk_line=copy.deepcopy(data.get("risk_line")),
            fee=copy.deepcopy(data.get("fee")),
            certificate_cid=data.get("certificate_cid"),
            loan=copy.deepcopy(data.get("loan")),
            claim=copy.deepcopy(data.get("claim")),
            financial_grants=dict(data.get("financial_grants", {})),
            closure_note=data.get("closure_note"),
            event_log=copy.deepcopy(data["event_log"]),
        )

    def clone(self) -> "GuaranteeCase":
        return GuaranteeCase.from_state(self.to_state())


def make_event(time: int, event: str, actor: str, args: dict[str, Any] | None = None) -> dict[str, Any]:
    return {"time": time, "event": event, "actor": actor, "args": args or {}}


def case_from_opening(record: dict[str, Any]) -> GuaranteeCase:
    """Build the initial case from a case_opened event record."""
    if record["event"] != st.EV_CASE_OPENED:
        raise Rejection("BadEventLog", f"log must start with {st.EV_CASE_OPENED}")
    args = record["args"]
    case = GuaranteeCase(
        case_id=args["case_id"],
        pathway=Pathway(args["pathway"]),
        state=CaseState.CREATED,
        borrower=args["borrower"],
        bank=args["bank"],
        cgi=args["cgi"],
        application_cid=args["application_cid"],
        principal=args["principal"],
        schedule=[list(entry) for entry in args["schedule"]],
        ruleset_hash=args["ruleset_hash"],
        kyc={
            "dossier_cid": args["application_cid"],
            "required_fields": sorted(args.get("required_fields", [])),
            "provided_fields": sorted(args.get("provided_fields", [])),
            "status": "Pending",
            "missing": [],
        },
        event_log=[record],
    )
    return case


def evolve(case: GuaranteeCase, record: dict[str, Any]) -> None:
    """Apply one event record to the case, in place.

    Rejects (without touching the case) if the transition relation has no row
    for (current state, event).
    """
    event = record["event"]
    target = st.next_state(case.pathway, case.state, event)
    if target is None:
        raise Rejection("WrongState", f"no transition for {event} from {case.state.value}")
    args = record["args"]
    time = record["time"]

    if event == st.EV_APPLICATION_SUPPLEMENTED:
        provided = set(case.kyc["provided_fields"]) | set(args.get("provided_fields", []))
        case.kyc["provided_fields"] = sorted(provided)
        if args.get("application_cid"):
            case.kyc["dossier_cid"] = args["application_cid"]
        case.kyc["status"] = "Pending"
        case.kyc["missing"] = []
    elif event == st.EV_KYC_VERIFIED:
        case.kyc["status"] = "Verified"
        case.kyc["missing"] = []
    elif event == st.EV_KYC_MORE_DATA:
        case.kyc["status"] = "MissingFields"
        case.kyc["missing"] = sorted(args["missing"])
    elif event in (st.EV_REVIEW_STARTED, st.EV_CRITERIA_CHECKED):
        case.eligibility = {"rules": [list(r) for r in args["rules"]], "overall": args["overall"]}
    elif event == st.EV_COLLATERAL_SUFFICIENT:
        case.closure_note = "NoGuaranteeNeeded"
    elif event == st.EV_FINANCIAL_DATA_GRANTED:
        case.financial_grants[args["content_id"]] = args["shared_cid"]
    elif event == st.EV_RISK_LINE_PROPOSED:
        case.risk_line = {
            "coverage_bps": args["coverage_bps"],
            "seniority": args["seniority"],
            "cap": args["cap"],
            "proposed_by": args["by"],
            "agreed_by_bank": args["by"] == "bank",
            "agreed_by_cgi": args["by"] == "cgi",
        }
    elif event == st.EV_RISK_LINE_ACCEPTED:
        assert case.risk_line is not None
        case.risk_line["agreed_by_bank"] = True
        case.risk_line["agreed_by_cgi"] = True
    elif event == st.EV_FEE_COMPUTED:
        case.fee = {
            "fee_amount": args["fee_amount"],
            "rate_bps": args["rate_bps"],
            "payer": args["payer"],
            "paid": False,
        }
    elif event == st.EV_FEE_VERIFIED:
        assert case.fee is not None
        case.fee["paid"] = True
        case.fee["payment_tx"] = args["payment_tx"]
    elif event == st.EV_CERTIFICATE_ISSUED:
        case.certificate_cid = args["certificate_cid"]
    elif event == st.EV_LOAN_DISBURSED:
        case.loan = {
            "principal": case.principal,
            "schedule": [list(entry) for entry in case.schedule],
            "outstanding": case.principal,
            "payments": [],
            "consecutive_missed": 0,
            "creditworthiness_notes": [],
        }
    elif event == st.EV_PAYMENT_RECORDED:
        assert case.loan is not None
        case.loan["outstanding"] -= args["amount"]
        case.loan["consecutive_missed"] = 0
        case.loan["payments"].append([time, args["amount"], "Regular"])
    elif event == st.EV_PAYMENT_MISSED:
        assert case.loan is not None
        case.loan["consecutive_missed"] += 1
        case.loan["payments"].append([time, 0, "Missed"])
    elif event == st.EV_CREDIT_NOTE_ADDED:
        assert case.loan is not None
        case.loan["creditworthiness_notes"].append([time, args["note_cid"]])
    elif event == st.EV_CLAIM_FILED:
        case.claim = {
            "filed_at": time,
            "claimed_amount": args["claimed_amount"],
            "eligibility": "Pending",
            "recovery_action_cids": list(args.get("recovery_action_cids", [])),
        }
    elif event == st.EV_CLAIM_ELIGIBLE:
        assert case.claim is not None
        case.claim["eligibility"] = "Eligible"
        case.claim.pop("ineligible_reason", None)
    elif event == st.EV_CLAIM_INELIGIBLE:
        assert case.claim is not None
        case.claim["eligibility"] = "Ineligible"
        case.claim["ineligible_reason"] = args["reason"]
    elif event == st.EV_DISPUTE_OPENED:
        assert case.claim is not None
        case.claim["dispute"] = {
            "opened_by": args["opened_by"],
            "evidence_cids": list(args.get("evidence_cids", [])),
            "rulings": {},
        }
    elif event == st.EV_DISPUTE_RULING:
        dispute = case.claim["dispute"]
        dispute["rulings"][args["slot"]] = {"by": args["by"], "ruling": args["ruling"]}
    elif event == st.EV_DISPUTE_RESET:
        case.claim["dispute"]["rulings"] = {}
    elif event == st.EV_DISPUTE_RESOLVED:
        dispute = case.claim["dispute"]
        dispute["ruling"] = args["ruling"]
        case.claim["eligibility"] = args["final_eligibility"]
        if args["final_eligibility"] == "Eligible":
            case.claim.pop("ineligible_reason", None)
        else:
            case.claim["ineligible_reason"] = args.get("reason", "OverturnedOnDispute")
    elif event == st.EV_PAYOUT_EXECUTED:
        assert case.claim is not None
        case.claim["payout"] = args["payout"]
    elif event == st.EV_CLOSED_WITHOUT_PAYOUT:
        if args.get("note"):
            case.closure_note = args["note"]

    case.state = target
    case.event_log.append(record)


def replay_case(event_log: list[dict[str, Any]]) -> GuaranteeCase:
    """Rebuild a case from its event log alone."""
    if not event_log:
        raise Rejection("BadEventLog", "empty log")
    case = case_from_opening(event_log[0])
    for record in event_log[1:]:
        evolve(case, record)
    return case
