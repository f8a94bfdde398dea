"""Case states and the transition relation for both application pathways.

The relation is a static table keyed by (state, event). Head rows differ per
pathway; every row from GuaranteeApproved onward is shared, so the
sub-machines the two pathways can reach after approval are identical. The
ex-post pathway passes through LoanRequested and BankAccepted implicitly
(the bank initiated the application, so its acceptance is automatic).
"""

from __future__ import annotations

from enum import Enum


class Pathway(str, Enum):
    EX_ANTE = "ExAnte"
    EX_POST = "ExPost"


class CaseState(str, Enum):
    CREATED = "Created"
    # ex-ante head
    KYC_SUBMITTED = "KycSubmitted"
    KYC_NEEDS_MORE_DATA = "KycNeedsMoreData"
    KYC_VERIFIED = "KycVerified"
    GUARANTEE_UNDER_REVIEW = "GuaranteeUnderReview"
    # ex-post head
    LOAN_APPLICATION_AT_BANK = "LoanApplicationAtBank"
    COLLATERAL_ASSESSED = "CollateralAssessed"
    GUARANTEE_REQUESTED = "GuaranteeRequested"
    CRITERIA_AUTO_CHECKED = "CriteriaAutoChecked"
    # convergence point and shared tail
    GUARANTEE_APPROVED = "GuaranteeApproved"
    GUARANTEE_REJECTED = "GuaranteeRejected"
    LOAN_REQUESTED = "LoanRequested"
    BANK_ACCEPTED = "BankAccepted"
    BANK_REJECTED = "BankRejected"
    RISK_LINE_NEGOTIATION = "RiskLineNegotiation"
    RISK_LINE_AGREED = "RiskLineAgreed"
    FEE_PENDING = "FeePending"
    FEE_VERIFIED = "FeeVerified"
    CERTIFICATE_ISSUED = "CertificateIssued"
    LOAN_ACTIVE = "LoanActive"
    REPAID = "Repaid"
    CLOSED = "Closed"
    DEFAULT_TRIGGERED = "DefaultTriggered"
    CLAIM_FILED = "ClaimFiled"
    CLAIM_ELIGIBLE = "ClaimEligible"
    CLAIM_INELIGIBLE = "ClaimIneligible"
    DISPUTED = "Disputed"
    RESOLVED = "Resolved"
    PAID_OUT = "PaidOut"
    CLOSED_WITHOUT_PAYOUT = "ClosedWithoutPayout"


S = CaseState

TERMINAL_STATES = frozenset(
    {S.GUARANTEE_REJECTED, S.BANK_REJECTED, S.CLOSED, S.PAID_OUT, S.CLOSED_WITHOUT_PAYOUT}
)

# Event names as they appear in case event logs.
EV_CASE_OPENED = "case_opened"
EV_APPLICATION_SUBMITTED = "application_submitted"
EV_APPLICATION_SUPPLEMENTED = "application_supplemented"
EV_KYC_VERIFIED = "kyc_verified"
EV_KYC_MORE_DATA = "kyc_more_data_requested"
EV_REVIEW_STARTED = "review_started"
EV_LOAN_APPLICATION_RECORDED = "loan_application_recorded"
EV_COLLATERAL_SUFFICIENT = "collateral_sufficient"
EV_COLLATERAL_INSUFFICIENT = "collateral_insufficient"
EV_GUARANTEE_REQUESTED = "guarantee_requested"
EV_CRITERIA_CHECKED = "criteria_checked"
EV_GUARANTEE_APPROVED = "guarantee_approved"
EV_GUARANTEE_REJECTED = "guarantee_rejected"
EV_FINANCIAL_DATA_GRANTED = "financial_data_granted"
EV_LOAN_REQUESTED = "loan_requested"
EV_BANK_ACCEPTED = "bank_accepted"
EV_BANK_REJECTED = "bank_rejected"
EV_RISK_LINE_PROPOSED = "risk_line_proposed"
EV_RISK_LINE_ACCEPTED = "risk_line_accepted"
EV_FEE_COMPUTED = "fee_computed"
EV_FEE_VERIFIED = "fee_verified"
EV_CERTIFICATE_ISSUED = "certificate_issued"
EV_LOAN_DISBURSED = "loan_disbursed"
EV_PAYMENT_RECORDED = "payment_recorded"
EV_PAYMENT_MISSED = "payment_missed"
EV_CREDIT_NOTE_ADDED = "credit_note_added"
EV_LOAN_REPAID = "loan_repaid"
EV_CASE_CLOSED = "case_closed"
EV_DEFAULT_TRIGGERED = "default_triggered"
EV_CLAIM_FILED = "claim_filed"
EV_CLAIM_ELIGIBLE = "claim_ruled_eligible"
EV_CLAIM_INELIGIBLE = "claim_ruled_ineligible"
EV_DISPUTE_OPENED = "dispute_opened"
EV_DISPUTE_RULING = "dispute_ruling_recorded"
EV_DISPUTE_RESET = "dispute_rulings_reset"
EV_DISPUTE_RESOLVED = "dispute_resolved"
EV_PAYOUT_EXECUTED = "payout_executed"
EV_CLOSED_WITHOUT_PAYOUT = "case_closed_without_payout"

_HEAD_EX_ANTE: dict[tuple[CaseState, str], CaseState] = {
    (S.CREATED, EV_APPLICATION_SUBMITTED): S.KYC_SUBMITTED,
    (S.KYC_SUBMITTED, EV_KYC_VERIFIED): S.KYC_VERIFIED,
    (S.KYC_SUBMITTED, EV_KYC_MORE_DATA): S.KYC_NEEDS_MORE_DATA,
    (S.KYC_NEEDS_MORE_DATA, EV_APPLICATION_SUPPLEMENTED): S.KYC_SUBMITTED,
    (S.KYC_VERIFIED, EV_REVIEW_STARTED): S.GUARANTEE_UNDER_REVIEW,
    (S.GUARANTEE_UNDER_REVIEW, EV_GUARANTEE_APPROVED): S.GUARANTEE_APPROVED,
    (S.GUARANTEE_UNDER_REVIEW, EV_GUARANTEE_REJECTED): S.GUARANTEE_REJECTED,
}

_HEAD_EX_POST: dict[tuple[CaseState, str], CaseState] = {
    (S.CREATED, EV_LOAN_APPLICATION_RECORDED): S.LOAN_APPLICATION_AT_BANK,
    (S.LOAN_APPLICATION_AT_BANK, EV_COLLATERAL_SUFFICIENT): S.CLOSED_WITHOUT_PAYOUT,
    (S.LOAN_APPLICATION_AT_BANK, EV_COLLATERAL_INSUFFICIENT): S.COLLATERAL_ASSESSED,
    (S.COLLATERAL_ASSESSED, EV_GUARANTEE_REQUESTED): S.GUARANTEE_REQUESTED,
    (S.GUARANTEE_REQUESTED, EV_CRITERIA_CHECKED): S.CRITERIA_AUTO_CHECKED,
    (S.CRITERIA_AUTO_CHECKED, EV_GUARANTEE_APPROVED): S.GUARANTEE_APPROVED,
    (S.CRITERIA_AUTO_CHECKED, EV_GUARANTEE_REJECTED): S.GUARANTEE_REJECTED,
}

# Financial-data grants may be recorded in any live post-approval state; the
# case state does not move, so these rows are self-loops.
_GRANT_STATES = (
    S.GUARANTEE_APPROVED,
    S.LOAN_REQUESTED,
    S.BANK_ACCEPTED,
    S.RISK_LINE_NEGOTIATION,
    S.FEE_PENDING,
    S.FEE_VERIFIED,
    S.CERTIFICATE_ISSUED,
    S.LOAN_ACTIVE,
    S.DEFAULT_TRIGGERED,
    S.CLAIM_ELIGIBLE,
    S.CLAIM_INELIGIBLE,
    S.DISPUTED,
    S.RESOLVED,
)

_TAIL: dict[tuple[CaseState, str], CaseState] = {
    (S.GUARANTEE_APPROVED, EV_LOAN_REQUESTED): S.LOAN_REQUESTED,
    (S.LOAN_REQUESTED, EV_BANK_ACCEPTED): S.BANK_ACCEPTED,
    (S.LOAN_REQUESTED, EV_BANK_REJECTED): S.BANK_REJECTED,
    (S.BANK_ACCEPTED, EV_RISK_LINE_PROPOSED): S.RISK_LINE_NEGOTIATION,
    (S.RISK_LINE_NEGOTIATION, EV_RISK_LINE_PROPOSED): S.RISK_LINE_NEGOTIATION,
    (S.RISK_LINE_NEGOTIATION, EV_RISK_LINE_ACCEPTED): S.RISK_LINE_AGREED,
    (S.RISK_LINE_AGREED, EV_FEE_COMPUTED): S.FEE_PENDING,
    (S.FEE_PENDING, EV_FEE_VERIFIED): S.FEE_VERIFIED,
    (S.FEE_VERIFIED, EV_CERTIFICATE_ISSUED): S.CERTIFICATE_ISSUED,
    (S.CERTIFICATE_ISSUED, EV_LOAN_DISBURSED): S.LOAN_ACTIVE,
    (S.LOAN_ACTIVE, EV_PAYMENT_RECORDED): S.LOAN_ACTIVE,
    (S.LOAN_ACTIVE, EV_PAYMENT_MISSED): S.LOAN_ACTIVE,
    (S.LOAN_ACTIVE, EV_CREDIT_NOTE_ADDED): S.LOAN_ACTIVE,
    (S.LOAN_ACTIVE, EV_LOAN_REPAID): S.REPAID,
    (S.LOAN_ACTIVE, EV_DEFAULT_TRIGGERED): S.DEFAULT_TRIGGERED,
    (S.REPAID, EV_CASE_CLOSED): S.CLOSED,
    (S.DEFAULT_TRIGGERED, EV_CLAIM_FILED): S.CLAIM_FILED,
    (S.CLAIM_FILED, EV_CLAIM_ELIGIBLE): S.CLAIM_ELIGIBLE,
    (S.CLAIM_FILED, EV_CLAIM_INELIGIBLE): S.CLAIM_INELIGIBLE,
    (S.CLAIM_ELIGIBLE, EV_DISPUTE_OPENED): S.DISPUTED,
    (S.CLAIM_ELIGIBLE, EV_PAYOUT_EXECUTED): S.PAID_OUT,
    (S.CLAIM_INELIGIBLE, EV_DISPUTE_OPENED): S.DISPUTED,
    (S.CLAIM_INELIGIBLE, EV_CLOSED_WITHOUT_PAYOUT): S.CLOSED_WITHOUT_PAYOUT,
    (S.DISPUTED, EV_DISPUTE_RULING): S.DISPUTED,
    (S.DISPUTED, EV_DISPUTE_RESET): S.DISPUTED,
    (S.DISPUTED, EV_DISPUTE_RESOLVED): S.RESOLVED,
    (S.RESOLVED, EV_PAYOUT_EXECUTED): S.PAID_OUT,
    (S.RESOLVED, EV_CLOSED_WITHOUT_PAYOUT): S.CLOSED_WITHOUT_PAYOUT,
}
_TAIL.update({(state, EV_FINANCIAL_DATA_GRANTED): state for state in _GRANT_STATES})


def transition_relation(pathway: Pathway) -> dict[tuple[CaseState, str], CaseState]:
    head = _HEAD_EX_ANTE if pathway == Pathway.EX_ANTE else _HEAD_EX_POST
    table = dict(head)
    table.update(_TAIL)
    return table


def next_state(pathway: Pathway, state: CaseState, event: str) -> CaseState | None:
    return transition_relation(pathway).get((state, event))


def reachable_relation(
    pathway: Pathway, start: CaseState
) -> set[tuple[CaseState, str, CaseState]]:
    """All (state, event, next) triples reachable from `start` in the pathway's relation."""
    table = transition_relation(pathway)
    seen = {start}
    frontier = [start]
    triples: set[tuple[CaseState, str, CaseState]] = set()
    while frontier:
        state = frontier.pop()
        for (src, event), dst in table.items():
            if src != state:
                continue
            triples.add((src, event, dst))
            if dst not in seen:
                seen.add(dst)
                frontier.append(dst)
    return triples
