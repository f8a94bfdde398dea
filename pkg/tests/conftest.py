"""Shared test network builder: five actors, genesis, round-per-action helpers."""

from __future__ import annotations

import pytest

from gledger.accounts import generate_account
from gledger.canon import canonical_serialize, sha256
from gledger.consensus import run_round
from gledger.ledger import (
    admin_payload,
    call_payload,
    sign_transaction,
    system_transaction,
    transfer_payload,
)
from gledger.node import NetworkConfig, Node
from gledger.roles import PermissionMatrix, Role

DEFAULT_ACTORS = [
    ("cgi1", Role.CGI, 10_000_000),
    ("gov", Role.GOVERNMENT_AGENCY, 0),
    ("acme", Role.BORROWER, 1_000_000),
    ("bank1", Role.BANK, 20_000_000),
    ("aud", Role.AUDITOR, 0),
]


class TestNet:
    """A bootstrapped network where every helper call drives one consensus round."""

    __test__ = False  # not a test case despite the name

    def __init__(self, seed: bytes = bytes(32), actors=None, ruleset=None, trigger_misses=3,
                 fee_rate_bps=100, admit_all=True):
        actors = actors if actors is not None else DEFAULT_ACTORS
        self.config = NetworkConfig(
            seed=seed,
            matrix=PermissionMatrix.default(),
            ruleset=ruleset if ruleset is not None else [],
            fee_rate_bps=fee_rate_bps,
            trigger_misses=trigger_misses,
        )
        self.node = Node(self.config)
        self.keys = {}
        self.roles = {}
        self.attestations = {}
        self.time = 0
        for label, role, balance in actors:
            keypair = generate_account(sha256(seed + b"|actor|" + label.encode()))
            self.keys[label] = keypair
            self.roles[label] = role
            self.node.register_key(keypair)
            dossier = canonical_serialize({"kind": "identity_dossier", "label": label})
            self.attestations[label] = self.node.docstore.put(
                dossier, [Role.CGI, Role.GOVERNMENT_AGENCY], self.node.keyring
            ).hex()
        genesis = [system_transaction(1, self.config.set_config_payload())]
        nonce = 2
        for label, _, balance in actors:
            genesis.append(system_transaction(nonce, admin_payload(
                "mint", address=self.address(label), amount=balance)))
            nonce += 1
        first_cgi = next(l for l, r, _ in actors if r == Role.CGI)
        first_gov = next(l for l, r, _ in actors if r == Role.GOVERNMENT_AGENCY)
        genesis.append(system_transaction(nonce, self.admit_payload(first_cgi)))
        genesis.append(system_transaction(nonce + 1, self.admit_payload(first_gov)))
        self.node.bootstrap(genesis)
        if admit_all:
            for label, role, _ in actors:
                if label not in (first_cgi, first_gov):
                    self.submit(first_cgi, self.admit_payload(label))
            assert self.round().outcome == "Finalized"

    def address(self, label: str) -> str:
        return self.keys[label].address_hex

    def admit_payload(self, label: str) -> dict:
        keypair = self.keys[label]
        return admin_payload(
            "admit",
            address=keypair.address_hex,
            role=self.roles[label].value,
            attestation_cid=self.attestations[label],
            public_key=keypair.account.public_key.hex(),
        )

    def submit(self, label: str, payload: dict) -> str:
        self.time += 1
        keypair = self.keys[label]
        tx = sign_transaction(keypair, self.node.next_nonce(keypair.address_hex), payload, self.time)
        return self.node.submit(tx)

    def round(self, behavior_labels: dict[str, str] | None = None):
        behavior = {self.address(l): b for l, b in (behavior_labels or {}).items()}
        return run_round(self.node, behavior)

    def call(self, label: str, case_id: str, op: str, args: dict | None = None):
        """Submit a contract call and finalize a round; returns (round, tx hash)."""
        digest = self.submit(label, call_payload(case_id, op, args or {}))
        result = self.round()
        assert result.outcome == "Finalized", result
        return result, digest

    def call_ok(self, label: str, case_id: str, op: str, args: dict | None = None) -> str:
        result, digest = self.call(label, case_id, op, args)
        rejected = {r["tx"]: r for r in result.rejections}
        assert digest not in rejected, rejected[digest]
        return digest

    def call_rejected(self, label: str, case_id: str, op: str, args: dict | None = None) -> str:
        """Submit a call expected to be filtered out; returns the rejection reason."""
        result, digest = self.call(label, case_id, op, args)
        rejected = {r["tx"]: r for r in result.rejections}
        assert digest in rejected, f"{op} unexpectedly accepted"
        return rejected[digest]["reason"]

    def transfer(self, label: str, to_label: str, amount: int, memo: str = "") -> str:
        digest = self.submit(label, transfer_payload(self.address(to_label), amount, memo=memo))
        result = self.round()
        assert result.outcome == "Finalized"
        rejected = {r["tx"]: r for r in result.rejections}
        assert digest not in rejected, rejected[digest]
        return digest

    def case(self, case_id: str = "case-0001"):
        return self.node.state.cases[case_id]


@pytest.fixture
def net() -> TestNet:
    return TestNet()


def open_ex_ante(net: TestNet, principal=6_000_000, schedule=None, required=None, provided=None) -> str:
    """Borrower application through automatic screening; returns the case id."""
    dossier = net.node.docstore.put(b"financial statements", [Role.BORROWER, Role.CGI], net.node.keyring)
    net.call_ok("acme", "", "submit_application", {
        "bank": net.address("bank1"),
        "cgi": net.address("cgi1"),
        "application_cid": dossier.hex(),
        "principal": principal,
        "schedule": schedule if schedule is not None else [[100, principal]],
        "required_fields": required if required is not None else ["id"],
        "provided_fields": provided if provided is not None else ["id"],
    })
    return f"case-{net.node.state.case_seq:04d}"


def open_ex_post(net: TestNet, principal=10_000_000, collateral_sufficient=False) -> str:
    dossier = net.node.docstore.put(b"bank loan application", [Role.BORROWER, Role.CGI], net.node.keyring)
    net.call_ok("bank1", "", "bank_evaluate_loan", {
        "borrower": net.address("acme"),
        "cgi": net.address("cgi1"),
        "application_cid": dossier.hex(),
        "principal": principal,
        "schedule": [[100, principal]],
        "collateral_sufficient": collateral_sufficient,
    })
    return f"case-{net.node.state.case_seq:04d}"


def to_loan_active(net: TestNet, case_id: str, coverage_bps=8000, seniority="FirstDemand", cap=None):
    """Drive an approved case through risk line, fee, certificate and disbursement."""
    from gledger.contracts.engine import certificate_cid_for
    from gledger.contracts.states import CaseState

    case = net.case(case_id)
    cap = cap if cap is not None else case.principal
    if case.state == CaseState.GUARANTEE_UNDER_REVIEW or case.state == CaseState.CRITERIA_AUTO_CHECKED:
        net.call_ok("cgi1", case_id, "cgi_decide_guarantee", {"decision": "approve"})
        case = net.case(case_id)
    if case.state == CaseState.GUARANTEE_APPROVED:
        shared = net.node.docstore.restore_with_policy(
            bytes.fromhex(case.application_cid), [Role.BANK], net.node.keyring)
        net.call_ok("cgi1", case_id, "grant_to_bank",
                    {"content_id": case.application_cid, "shared_cid": shared.hex()})
        net.call_ok("bank1", case_id, "bank_evaluate_loan", {"decision": "accept"})
    net.call_ok("cgi1", case_id, "risk_line_step",
                {"action": "propose", "coverage_bps": coverage_bps, "seniority": seniority, "cap": cap})
    net.call_ok("bank1", case_id, "risk_line_step", {"action": "accept"})
    if net.case(case_id).state == CaseState.FEE_PENDING:  # zero fees auto-verify
        fee = net.case(case_id).fee
        payer = "acme" if fee["payer"] == net.address("acme") else "bank1"
        net.transfer(payer, "cgi1", fee["fee_amount"], memo=case_id)
        net.call_ok("cgi1", case_id, "verify_fee_payment", {})
    cert = certificate_cid_for(net.case(case_id), net.node.docstore, net.node.keyring)
    net.call_ok("cgi1", case_id, "issue_certificate", {"certificate_cid": cert.hex()})
    net.call_ok("bank1", case_id, "disburse_loan", {})
    assert net.case(case_id).state == CaseState.LOAN_ACTIVE


def to_default(net: TestNet, case_id: str, misses: int = 3):
    for _ in range(misses):
        net.call_ok("bank1", case_id, "record_payment_event", {"event": "missed"})
