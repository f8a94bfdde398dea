"""Contract command engine.

`Engine.decide` validates a contract call against the current ledger state
and returns the event records it produces (the command's own event plus any
automatic follow-ups). It never mutates the passed state: application
happens separately by folding the returned events into the stored case, so
a rejected command leaves state bit-identical.

Automatic rules fire in the same block as the event that enabled them:
instant KYC screening, eligibility checks, the implicit bank acceptance on
the ex-post pathway, fee computation after risk-line agreement, repayment
and default detection, claim eligibility, and dispute resolution.
"""

from __future__ import annotations

from typing import Any, Protocol

from ..canon import canonical_serialize, hash_value
from ..docstore import DocStore, RoleKeyring
from ..errors import Rejection
from ..roles import Action, Role
from . import states as st
from .case import GuaranteeCase, case_from_opening, evolve, make_event
from .states import CaseState, Pathway

SYSTEM_ACTOR = "system"

CERTIFICATE_POLICY = (Role.BORROWER, Role.BANK, Role.CGI)

# Operations a client may submit as contract calls, in catalog order.
CONTRACT_OPS = (
    "submit_application",
    "bank_evaluate_loan",
    "cgi_decide_guarantee",
    "grant_to_bank",
    "auto_submit_loan_request",
    "bank_request_guarantee",
    "risk_line_step",
    "verify_fee_payment",
    "issue_certificate",
    "disburse_loan",
    "record_payment_event",
    "trigger_default",
    "file_claim",
    "check_claim_eligibility",
    "dispute_step",
    "enforce_and_payout",
)


class StateView(Protocol):
    cases: dict[str, GuaranteeCase]
    case_seq: int
    fee_payments: dict[str, list[dict[str, Any]]]
    balances: dict[str, int]
    config: dict[str, Any]

    def active_role(self, address_hex: str) -> Role | None: ...
    def allows(self, address_hex: str, action: Action) -> bool: ...


def compute_fee(coverage_bps: int, principal: int, fee_rate_bps: int) -> int:
    """Guarantee fee in minor units: floor(coverage * principal * rate / 10^8)."""
    return coverage_bps * principal * fee_rate_bps // 10**8


def compute_payout(coverage_bps: int, cap: int, outstanding: int, claimed_amount: int) -> int:
    """Payout in minor units: min(claim, cap, floor(coverage * outstanding))."""
    covered = coverage_bps * outstanding // 10000
    return min(claimed_amount, cap, covered)


def evaluate_ruleset(ruleset: list[dict[str, Any]], case: GuaranteeCase, state: StateView) -> dict[str, Any]:
    """Evaluate the configured eligibility predicates against case data.

    Overall is the conjunction of per-rule results; an empty ruleset passes.
    """
    results: list[list[Any]] = []
    overall = True
    for rule in ruleset:
        field, op, value = rule["field"], rule["op"], rule["value"]
        actual = _rule_field(field, case, state)
        if op == "<=":
            passed = isinstance(actual, int) and isinstance(value, int) and actual <= value
        elif op == ">=":
            passed = isinstance(actual, int) and isinstance(value, int) and actual >= value
        elif op == "==":
            passed = actual == value
        else:
            raise Rejection("RulesetMissing", f"unknown rule operator {op!r}")
        results.append([f"{field}{op}{value}", passed])
        overall = overall and passed
    return {"rules": results, "overall": overall}


def _rule_field(field: str, case: GuaranteeCase, state: StateView) -> Any:
    if field == "principal":
        return case.principal
    if field == "pathway":
        return case.pathway.value
    if field == "borrower_role":
        role = state.active_role(case.borrower)
        return role.value if role else "None"
    if field == "provided_fields_count":
        return len(case.kyc["provided_fields"])
    if field == "schedule_len":
        return len(case.schedule)
    raise Rejection("RulesetMissing", f"unknown rule field {field!r}")


def certificate_plaintext(case: GuaranteeCase) -> bytes:
    """Deterministic guarantee-certificate document for a fee-verified case."""
    assert case.risk_line is not None
    return canonical_serialize(
        {
            "kind": "guarantee_certificate",
            "case_id": case.case_id,
            "borrower": case.borrower,
            "bank": case.bank,
            "cgi": case.cgi,
            "coverage_bps": case.risk_line["coverage_bps"],
            "seniority": case.risk_line["seniority"],
            "cap": case.risk_line["cap"],
            "principal": case.principal,
            "schedule_hash": hash_value(case.schedule).hex(),
        }
    )


def certificate_cid_for(case: GuaranteeCase, docstore: DocStore, keyring: RoleKeyring) -> bytes:
    """Store (idempotently) and address the certificate for a case."""
    return docstore.put(certificate_plaintext(case), CERTIFICATE_POLICY, keyring)


def event_topics(case: GuaranteeCase, record: dict[str, Any]) -> list[str]:
    """Notification topics (addresses or role names) for a case event."""
    event = record["event"]
    borrower, bank, cgi = case.borrower, case.bank, case.cgi
    table = {
        st.EV_APPLICATION_SUBMITTED: [cgi],
        st.EV_APPLICATION_SUPPLEMENTED: [cgi],
        st.EV_KYC_MORE_DATA: [borrower],
        st.EV_KYC_VERIFIED: [borrower, cgi],
        st.EV_REVIEW_STARTED: [cgi],
        st.EV_LOAN_APPLICATION_RECORDED: [bank],
        st.EV_COLLATERAL_SUFFICIENT: [borrower, bank],
        st.EV_COLLATERAL_INSUFFICIENT: [borrower, bank],
        st.EV_GUARANTEE_REQUESTED: [cgi],
        st.EV_CRITERIA_CHECKED: [cgi],
        st.EV_GUARANTEE_APPROVED: [borrower, bank, cgi],
        st.EV_GUARANTEE_REJECTED: [borrower, bank, cgi],
        st.EV_FINANCIAL_DATA_GRANTED: [bank],
        st.EV_LOAN_REQUESTED: [bank],
        st.EV_BANK_ACCEPTED: [borrower, cgi],
        st.EV_BANK_REJECTED: [borrower, cgi],
        st.EV_RISK_LINE_PROPOSED: [bank, cgi],
        st.EV_RISK_LINE_ACCEPTED: [bank, cgi],
        st.EV_FEE_COMPUTED: [borrower, bank, cgi],
        st.EV_FEE_VERIFIED: [borrower, bank, cgi],
        st.EV_CERTIFICATE_ISSUED: [borrower, bank, cgi],
        st.EV_LOAN_DISBURSED: [borrower, cgi],
        st.EV_PAYMENT_RECORDED: [cgi],
        st.EV_PAYMENT_MISSED: [cgi],
        st.EV_CREDIT_NOTE_ADDED: [cgi],
        st.EV_LOAN_REPAID: [borrower, bank, cgi],
        st.EV_CASE_CLOSED: [borrower, bank, cgi],
        st.EV_DEFAULT_TRIGGERED: [bank, cgi],
        st.EV_CLAIM_FILED: [cgi],
        st.EV_CLAIM_ELIGIBLE: [bank, cgi],
        st.EV_CLAIM_INELIGIBLE: [bank, cgi],
        st.EV_DISPUTE_OPENED: [bank, cgi, Role.AUDITOR.value],
        st.EV_DISPUTE_RULING: [bank, cgi],
        st.EV_DISPUTE_RESET: [bank, cgi, Role.AUDITOR.value],
        st.EV_DISPUTE_RESOLVED: [bank, cgi, Role.AUDITOR.value],
        st.EV_PAYOUT_EXECUTED: [borrower, bank, cgi],
        st.EV_CLOSED_WITHOUT_PAYOUT: [borrower, bank, cgi],
    }
    return table.get(event, [borrower, bank, cgi])


class EngineContext:
    """Optional facilities for command validation.

    With a docstore attached (live nodes), content references in commands are
    verified against it; without one (bare chain replay) the recorded
    references are trusted, since the block was validated at proposal time.
    """

    def __init__(self, docstore: DocStore | None = None, keyring: RoleKeyring | None = None):
        self.docstore = docstore
        self.keyring = keyring


class Engine:
    def __init__(self, ctx: EngineContext | None = None):
        self.ctx = ctx or EngineContext()

    # ---- entry point ----

    def decide(
        self, state: StateView, sender: str, op: str, args: dict[str, Any], time: int
    ) -> tuple[str, list[dict[str, Any]]]:
        """Validate a contract call; returns (case_id, event records). Raises Rejection."""
        handler = getattr(self, f"_op_{op}", None)
        if handler is None:
            raise Rejection("UnknownOperation", op)
        return handler(state, sender, args, time)

    # ---- helpers ----

    def _case(self, state: StateView, args: dict[str, Any]) -> GuaranteeCase:
        case_id = args.get("case_id", "")
        if not case_id or case_id not in state.cases:
            raise Rejection("UnknownCase", case_id or "<missing>")
        return state.cases[case_id]

    def _expect_state(self, case: GuaranteeCase, *allowed: CaseState) -> None:
        if case.state not in allowed:
            raise Rejection(
                "WrongState",
                f"{case.case_id} is {case.state.value}, needs {'/'.join(s.value for s in allowed)}",
            )

    def _expect_party(self, case: GuaranteeCase, sender: str, *parties: str) -> None:
        for party in parties:
            if sender == getattr(case, party):
                return
        raise Rejection("WrongActor", f"sender is not the case {'/'.join(parties)}")

    def _expect_role(self, state: StateView, sender: str, role: Role) -> None:
        if state.active_role(sender) != role:
            raise Rejection("WrongActor", f"sender lacks active {role.value} role")

    def _expect_action(self, state: StateView, sender: str, action: Action, code: str = "RoleForbidden") -> None:
        if not state.allows(sender, action):
            raise Rejection(code, f"{action.value} not permitted for sender role")

    # ---- automatic rules ----

    def _auto_event(self, case: GuaranteeCase, state: StateView, time: int) -> dict[str, Any] | None:
        cfg = state.config
        s = case.state
        if s == CaseState.KYC_SUBMITTED:
            missing = sorted(set(case.kyc["required_fields"]) - set(case.kyc["provided_fields"]))
            if missing:
                return make_event(time, st.EV_KYC_MORE_DATA, SYSTEM_ACTOR, {"missing": missing})
            return make_event(time, st.EV_KYC_VERIFIED, SYSTEM_ACTOR)
        if s == CaseState.KYC_VERIFIED:
            result = evaluate_ruleset(cfg["ruleset"], case, state)
            return make_event(time, st.EV_REVIEW_STARTED, SYSTEM_ACTOR, result)
        if s == CaseState.LOAN_APPLICATION_AT_BANK:
            sufficient = case.event_log[0]["args"].get("collateral_sufficient", False)
            if sufficient:
                return make_event(time, st.EV_COLLATERAL_SUFFICIENT, SYSTEM_ACTOR, {"note": "NoGuaranteeNeeded"})
            return make_event(time, st.EV_COLLATERAL_INSUFFICIENT, SYSTEM_ACTOR)
        if s == CaseState.GUARANTEE_REQUESTED:
            result = evaluate_ruleset(cfg["ruleset"], case, state)
            return make_event(time, st.EV_CRITERIA_CHECKED, SYSTEM_ACTOR, result)
        if s == CaseState.CRITERIA_AUTO_CHECKED:
            if case.eligibility is not None and not case.eligibility["overall"]:
                return make_event(
                    time, st.EV_GUARANTEE_REJECTED, SYSTEM_ACTOR, {"auto": True, "reason": "CriteriaFailed"}
                )
            return None
        if s == CaseState.GUARANTEE_APPROVED:
            if case.pathway == Pathway.EX_POST:
                return make_event(time, st.EV_LOAN_REQUESTED, SYSTEM_ACTOR, {"implicit": True})
            if case.financial_grants:
                return make_event(time, st.EV_LOAN_REQUESTED, SYSTEM_ACTOR, {})
            return None
        if s == CaseState.LOAN_REQUESTED and case.pathway == Pathway.EX_POST:
            return make_event(time, st.EV_BANK_ACCEPTED, SYSTEM_ACTOR, {"implicit": True})
        if s == CaseState.RISK_LINE_AGREED:
            rate = cfg["fee_rate_bps"]
            amount = compute_fee(case.risk_line["coverage_bps"], case.principal, rate)
            payer = case.borrower if case.pathway == Pathway.EX_ANTE else case.bank
            return make_event(
                time, st.EV_FEE_COMPUTED, SYSTEM_ACTOR, {"fee_amount": amount, "rate_bps": rate, "payer": payer}
            )
        if s == CaseState.FEE_PENDING and case.fee is not None:
            # a fee that floors to zero has nothing to pay; transfers of zero
            # are not representable, so the gate clears itself
            if case.fee["fee_amount"] == 0 and not case.fee["paid"]:
                return make_event(time, st.EV_FEE_VERIFIED, SYSTEM_ACTOR, {"payment_tx": "", "amount": 0})
            return None
        if s == CaseState.LOAN_ACTIVE and case.loan is not None:
            if case.loan["outstanding"] == 0:
                return make_event(time, st.EV_LOAN_REPAID, SYSTEM_ACTOR)
            if case.loan["consecutive_missed"] >= cfg["trigger_misses"]:
                return make_event(time, st.EV_DEFAULT_TRIGGERED, SYSTEM_ACTOR, {"auto": True})
            return None
        if s == CaseState.REPAID:
            return make_event(time, st.EV_CASE_CLOSED, SYSTEM_ACTOR)
        if s == CaseState.CLAIM_FILED:
            return self._claim_determination(case, time)
        if s == CaseState.DISPUTED:
            rulings = case.claim["dispute"]["rulings"]
            if "cgi" in rulings and "auditor" in rulings:
                if rulings["cgi"]["ruling"] == rulings["auditor"]["ruling"]:
                    ruling = rulings["cgi"]["ruling"]
                    before = case.claim["eligibility"]
                    final = before if ruling == "Upheld" else ("Ineligible" if before == "Eligible" else "Eligible")
                    return make_event(
                        time,
                        st.EV_DISPUTE_RESOLVED,
                        SYSTEM_ACTOR,
                        {"ruling": ruling, "final_eligibility": final},
                    )
                return make_event(time, st.EV_DISPUTE_RESET, SYSTEM_ACTOR, {"reason": "DiscordantRulings"})
            return None
        return None

    def _claim_determination(self, case: GuaranteeCase, time: int) -> dict[str, Any]:
        claim, line, loan = case.claim, case.risk_line, case.loan
        reason = None
        if case.certificate_cid is None:
            reason = "CertificateMissing"
        elif case.fee is None or not case.fee["paid"]:
            reason = "FeeUnpaid"
        elif claim["claimed_amount"] > line["cap"]:
            reason = "ExceedsCap"
        elif claim["claimed_amount"] > line["coverage_bps"] * loan["outstanding"] // 10000:
            reason = "ExceedsCoverage"
        elif line["seniority"] == "PariPassu" and not claim["recovery_action_cids"]:
            reason = "NoRecoveryAction"
        if reason is not None:
            return make_event(time, st.EV_CLAIM_INELIGIBLE, SYSTEM_ACTOR, {"reason": reason})
        payout = compute_payout(line["coverage_bps"], line["cap"], loan["outstanding"], claim["claimed_amount"])
        return make_event(time, st.EV_CLAIM_ELIGIBLE, SYSTEM_ACTOR, {"max_payout": payout})

    # ---- case-creating operations ----

    def _op_submit_application(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        if args.get("case_id"):
            return self._supplement(state, sender, args, time)
        self._expect_role(state, sender, Role.BORROWER)
        opened = self._opening_event(state, sender, args, Pathway.EX_ANTE, time)
        case = case_from_opening(opened)
        submitted = make_event(time, st.EV_APPLICATION_SUBMITTED, sender)
        evolve(case, submitted)
        return self._cascade(case, state, [opened, submitted], time)

    def _supplement(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "borrower")
        self._expect_state(case, CaseState.KYC_NEEDS_MORE_DATA)
        provided = args.get("provided_fields", [])
        if not isinstance(provided, list) or not all(isinstance(f, str) for f in provided):
            raise Rejection("BadArguments", "provided_fields must be a list of field names")
        event = make_event(
            time,
            st.EV_APPLICATION_SUPPLEMENTED,
            sender,
            {"provided_fields": sorted(provided), "application_cid": args.get("application_cid", "")},
        )
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_bank_evaluate_loan(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        if args.get("case_id"):
            case = self._case(state, args)
            self._expect_party(case, sender, "bank")
            self._expect_state(case, CaseState.LOAN_REQUESTED)
            decision = args.get("decision")
            if decision not in ("accept", "reject"):
                raise Rejection("BadArguments", "decision must be accept or reject")
            name = st.EV_BANK_ACCEPTED if decision == "accept" else st.EV_BANK_REJECTED
            event = make_event(time, name, sender)
            scratch = case.clone()
            evolve(scratch, event)
            return self._cascade(scratch, state, [event], time)
        self._expect_role(state, sender, Role.BANK)
        if not isinstance(args.get("collateral_sufficient"), bool):
            raise Rejection("BadArguments", "collateral_sufficient boolean required")
        opened = self._opening_event(state, sender, args, Pathway.EX_POST, time)
        case = case_from_opening(opened)
        recorded = make_event(time, st.EV_LOAN_APPLICATION_RECORDED, sender)
        evolve(case, recorded)
        return self._cascade(case, state, [opened, recorded], time)

    def _opening_event(
        self, state: StateView, sender: str, args: dict[str, Any], pathway: Pathway, time: int
    ) -> dict[str, Any]:
        if pathway == Pathway.EX_ANTE:
            borrower, bank, cgi = sender, args.get("bank", ""), args.get("cgi", "")
        else:
            borrower, bank, cgi = args.get("borrower", ""), sender, args.get("cgi", "")
        for address, role in ((borrower, Role.BORROWER), (bank, Role.BANK), (cgi, Role.CGI)):
            if state.active_role(address) != role:
                raise Rejection("BadParty", f"{role.value} party missing or wrong role")
        if len({borrower, bank, cgi}) != 3:
            raise Rejection("BadParty", "borrower, bank and cgi must be distinct")
        principal = args.get("principal")
        schedule = args.get("schedule", [])
        if not isinstance(principal, int) or isinstance(principal, bool) or principal <= 0:
            raise Rejection("BadArguments", "principal must be a positive integer of minor units")
        if not isinstance(schedule, list) or not all(
            isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in e)
            for e in schedule
        ):
            raise Rejection("BadArguments", "schedule must be [due_time, amount] pairs")
        case_id = f"case-{state.case_seq + 1:04d}"
        opening_args = {
            "case_id": case_id,
            "pathway": pathway.value,
            "borrower": borrower,
            "bank": bank,
            "cgi": cgi,
            "application_cid": args.get("application_cid", ""),
            "principal": principal,
            "schedule": [list(e) for e in schedule],
            "required_fields": sorted(args.get("required_fields", [])),
            "provided_fields": sorted(args.get("provided_fields", [])),
            "ruleset_hash": state.config["ruleset_hash"],
        }
        if pathway == Pathway.EX_POST:
            opening_args["collateral_sufficient"] = args["collateral_sufficient"]
        return make_event(time, st.EV_CASE_OPENED, sender, opening_args)

    def _cascade(
        self, scratch: GuaranteeCase, state: StateView, events: list[dict[str, Any]], time: int
    ) -> tuple[str, list[dict[str, Any]]]:
        while True:
            follow = self._auto_event(scratch, state, time)
            if follow is None:
                return scratch.case_id, events
            evolve(scratch, follow)
            events.append(follow)

    # ---- case-driving operations ----

    def _op_cgi_decide_guarantee(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "cgi")
        self._expect_action(state, sender, Action.DECIDE_GUARANTEE)
        self._expect_state(case, CaseState.GUARANTEE_UNDER_REVIEW, CaseState.CRITERIA_AUTO_CHECKED)
        decision = args.get("decision")
        if decision not in ("approve", "reject"):
            raise Rejection("BadArguments", "decision must be approve or reject")
        name = st.EV_GUARANTEE_APPROVED if decision == "approve" else st.EV_GUARANTEE_REJECTED
        event = make_event(time, name, sender)
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_grant_to_bank(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        if sender != case.cgi:
            raise Rejection("NotCaseCgi", "only the case CGI may share documents")
        self._expect_state(case, *st._GRANT_STATES)
        content_id = args.get("content_id", "")
        shared_cid = args.get("shared_cid", "")
        if not content_id or not shared_cid:
            raise Rejection("BadArguments", "content_id and shared_cid required")
        if self.ctx.docstore is not None:
            store, keyring = self.ctx.docstore, self.ctx.keyring
            if not store.exists(bytes.fromhex(content_id)):
                raise Rejection("NotFound", content_id)
            policy = set(store.policy_of(bytes.fromhex(content_id)))
            if not (Role.CGI.value in policy and policy <= {Role.CGI.value, Role.BORROWER.value}):
                raise Rejection("PolicyNotShareable", "original policy must be CGI or CGI+Borrower")
            expected = store.restore_with_policy(bytes.fromhex(content_id), [Role.BANK], keyring)
            if expected.hex() != shared_cid:
                raise Rejection("GrantMismatch", "shared_cid does not match re-stored document")
        event = make_event(
            time, st.EV_FINANCIAL_DATA_GRANTED, sender, {"content_id": content_id, "shared_cid": shared_cid}
        )
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_auto_submit_loan_request(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "borrower", "bank", "cgi")
        self._expect_state(case, CaseState.GUARANTEE_APPROVED)
        if case.pathway == Pathway.EX_ANTE and not case.financial_grants:
            raise Rejection("GrantMissing", "financial data must be granted to the bank first")
        event = make_event(time, st.EV_LOAN_REQUESTED, sender)
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_bank_request_guarantee(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "bank")
        self._expect_state(case, CaseState.COLLATERAL_ASSESSED)
        event = make_event(time, st.EV_GUARANTEE_REQUESTED, sender)
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_risk_line_step(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "bank", "cgi")
        self._expect_action(state, sender, Action.PROPOSE_RISK_LINE)
        self._expect_state(case, CaseState.BANK_ACCEPTED, CaseState.RISK_LINE_NEGOTIATION)
        side = "bank" if sender == case.bank else "cgi"
        action = args.get("action")
        if action == "propose":
            coverage, seniority, cap = args.get("coverage_bps"), args.get("seniority"), args.get("cap")
            if (
                not isinstance(coverage, int)
                or isinstance(coverage, bool)
                or not 1 <= coverage <= 10000
                or seniority not in ("PariPassu", "FirstDemand")
                or not isinstance(cap, int)
                or isinstance(cap, bool)
                or cap < 0
            ):
                raise Rejection("BadProposal", "need coverage_bps in 1..10000, seniority, cap >= 0")
            event = make_event(
                time,
                st.EV_RISK_LINE_PROPOSED,
                sender,
                {"by": side, "coverage_bps": coverage, "seniority": seniority, "cap": cap},
            )
        elif action == "accept":
            if (
                case.state != CaseState.RISK_LINE_NEGOTIATION
                or case.risk_line is None
                or case.risk_line["proposed_by"] == side
            ):
                raise Rejection("AcceptWithoutOffer", "no standing counterparty offer to accept")
            event = make_event(time, st.EV_RISK_LINE_ACCEPTED, sender, {"by": side})
        else:
            raise Rejection("BadArguments", "action must be propose or accept")
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_verify_fee_payment(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "cgi")
        self._expect_state(case, CaseState.FEE_PENDING)
        payer, amount = case.fee["payer"], case.fee["fee_amount"]
        entries = [
            e for e in state.fee_payments.get(case.case_id, []) if e["from"] == payer and e["to"] == case.cgi
        ]
        match = next((e for e in entries if e["amount"] == amount), None)
        if match is None:
            if entries:
                raise Rejection("WrongAmount", f"no transfer of exactly {amount} found")
            raise Rejection("FeeNotFound", "no fee transfer for this case")
        event = make_event(
            time, st.EV_FEE_VERIFIED, sender, {"payment_tx": match["tx"], "amount": match["amount"]}
        )
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_issue_certificate(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "cgi")
        self._expect_state(case, CaseState.FEE_VERIFIED)
        certificate_cid = args.get("certificate_cid", "")
        if not certificate_cid:
            raise Rejection("BadArguments", "certificate_cid required")
        if self.ctx.docstore is not None:
            expected = certificate_cid_for(case, self.ctx.docstore, self.ctx.keyring)
            if expected.hex() != certificate_cid:
                raise Rejection("BadCertificate", "certificate_cid does not match case terms")
        event = make_event(time, st.EV_CERTIFICATE_ISSUED, sender, {"certificate_cid": certificate_cid})
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_disburse_loan(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "bank")
        self._expect_state(case, CaseState.CERTIFICATE_ISSUED)
        if state.balances.get(case.bank, 0) < case.principal:
            raise Rejection("InsufficientBankBalance", "bank cannot fund the principal")
        event = make_event(time, st.EV_LOAN_DISBURSED, sender, {"principal": case.principal})
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_record_payment_event(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "bank")
        self._expect_state(case, CaseState.LOAN_ACTIVE)
        kind = args.get("event")
        if kind == "regular":
            amount = args.get("amount")
            if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
                raise Rejection("BadArguments", "regular payment needs a positive amount")
            if amount > case.loan["outstanding"]:
                raise Rejection("OverPayment", f"amount exceeds outstanding {case.loan['outstanding']}")
            event = make_event(time, st.EV_PAYMENT_RECORDED, sender, {"amount": amount})
        elif kind == "missed":
            event = make_event(time, st.EV_PAYMENT_MISSED, sender)
        elif kind == "credit_note":
            note_cid = args.get("note_cid", "")
            if not note_cid:
                raise Rejection("BadArguments", "credit_note needs note_cid")
            if self.ctx.docstore is not None and not self.ctx.docstore.exists(bytes.fromhex(note_cid)):
                raise Rejection("NotFound", note_cid)
            event = make_event(time, st.EV_CREDIT_NOTE_ADDED, sender, {"note_cid": note_cid})
        else:
            raise Rejection("BadArguments", "event must be regular, missed or credit_note")
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_trigger_default(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "bank", "cgi")
        self._expect_state(case, CaseState.LOAN_ACTIVE)
        if case.loan["consecutive_missed"] < state.config["trigger_misses"]:
            raise Rejection(
                "ThresholdNotReached",
                f"{case.loan['consecutive_missed']} consecutive misses, need {state.config['trigger_misses']}",
            )
        event = make_event(time, st.EV_DEFAULT_TRIGGERED, sender, {"auto": False})
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_file_claim(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "bank")
        self._expect_action(state, sender, Action.FILE_CLAIM)
        self._expect_state(case, CaseState.DEFAULT_TRIGGERED)
        amount = args.get("claimed_amount")
        if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
            raise Rejection("BadArguments", "claimed_amount must be a positive integer")
        cids = args.get("recovery_action_cids", [])
        if not isinstance(cids, list) or not all(isinstance(c, str) for c in cids):
            raise Rejection("BadArguments", "recovery_action_cids must be a list of content ids")
        event = make_event(
            time, st.EV_CLAIM_FILED, sender, {"claimed_amount": amount, "recovery_action_cids": cids}
        )
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_check_claim_eligibility(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "borrower", "bank", "cgi")
        self._expect_state(case, CaseState.CLAIM_FILED)
        event = self._claim_determination(case, time)
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_dispute_step(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        action = args.get("action")
        if action == "open":
            if case.state == CaseState.CLAIM_ELIGIBLE:
                if sender != case.cgi:
                    raise Rejection("WrongActor", "only the CGI may dispute an eligible claim")
            elif case.state == CaseState.CLAIM_INELIGIBLE:
                if sender != case.bank:
                    raise Rejection("WrongActor", "only the bank may dispute an ineligible claim")
            else:
                raise Rejection("WrongState", f"cannot open a dispute from {case.state.value}")
            cids = args.get("evidence_cids", [])
            if not isinstance(cids, list) or not all(isinstance(c, str) for c in cids):
                raise Rejection("BadArguments", "evidence_cids must be a list of content ids")
            event = make_event(
                time, st.EV_DISPUTE_OPENED, sender, {"opened_by": sender, "evidence_cids": cids}
            )
        elif action == "rule":
            self._expect_state(case, CaseState.DISPUTED)
            ruling = args.get("ruling")
            if ruling not in ("Upheld", "Overturned"):
                raise Rejection("BadArguments", "ruling must be Upheld or Overturned")
            slot = args.get("arbiter") or ("cgi" if sender == case.cgi else "auditor")
            if slot not in ("cgi", "auditor"):
                raise Rejection("BadArguments", "arbiter must be cgi or auditor")
            if slot == "cgi" and sender != case.cgi:
                raise Rejection("NotArbiter", "cgi seat belongs to the case CGI")
            if slot == "auditor":
                if sender == case.cgi:
                    raise Rejection("SelfArbitration", "the case CGI cannot take the independent seat")
                if state.active_role(sender) != Role.AUDITOR:
                    raise Rejection("NotArbiter", "auditor seat requires an Auditor-role actor")
            self._expect_action(state, sender, Action.ARBITRATE, code="NotArbiter")
            event = make_event(
                time, st.EV_DISPUTE_RULING, sender, {"slot": slot, "by": sender, "ruling": ruling}
            )
        else:
            raise Rejection("BadArguments", "action must be open or rule")
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)

    def _op_enforce_and_payout(self, state: StateView, sender: str, args: dict[str, Any], time: int):
        case = self._case(state, args)
        self._expect_party(case, sender, "bank", "cgi")
        self._expect_state(case, CaseState.CLAIM_ELIGIBLE, CaseState.CLAIM_INELIGIBLE, CaseState.RESOLVED)
        if case.claim["eligibility"] == "Eligible":
            payout = compute_payout(
                case.risk_line["coverage_bps"],
                case.risk_line["cap"],
                case.loan["outstanding"],
                case.claim["claimed_amount"],
            )
            if state.balances.get(case.cgi, 0) < payout:
                raise Rejection("InsufficientGuaranteeFunds", "guarantee account cannot fund the payout")
            event = make_event(
                time,
                st.EV_PAYOUT_EXECUTED,
                sender,
                {"payout": payout, "actions": ["NotifyBorrower", "RecordEnforcement", "TransferPayout"]},
            )
        else:
            event = make_event(
                time,
                st.EV_CLOSED_WITHOUT_PAYOUT,
                sender,
                {"note": "ClaimDenied", "actions": ["NotifyBorrower", "RecordEnforcement"]},
            )
        scratch = case.clone()
        evolve(scratch, event)
        return self._cascade(scratch, state, [event], time)
