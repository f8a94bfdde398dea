"""Replicated ledger state and the transaction applier.

All state mutation flows through `apply_transaction` in block order, which
keeps replay deterministic: folding the same transactions from genesis
always reproduces the same state root. The root hashes the canonical
serialization of everything here: balances, nonces, admissions, cases,
network config, fee-transfer index and the event journal.
"""

from __future__ import annotations

import copy
from typing import Any

from .accounts import address_of
from .canon import hash_value
from .contracts.case import GuaranteeCase, case_from_opening, evolve
from .contracts.engine import Engine, EngineContext, event_topics
from .contracts import states as st
from .errors import Rejection
from .ledger import SYSTEM_ADDRESS, signature_valid, tx_hash
from .roles import Action, PermissionMatrix, Role


class LedgerState:
    def __init__(self) -> None:
        self.balances: dict[str, int] = {}
        self.nonces: dict[str, int] = {}
        self.admissions: dict[str, dict[str, Any]] = {}
        self.cases: dict[str, GuaranteeCase] = {}
        self.case_seq = 0
        self.fee_payments: dict[str, list[dict[str, Any]]] = {}
        self.journal: list[dict[str, Any]] = []
        self.config: dict[str, Any] = {}
        self._matrix: PermissionMatrix | None = None

    # ---- registry views ----

    def admission_of(self, address_hex: str) -> dict[str, Any] | None:
        return self.admissions.get(address_hex)

    def is_active(self, address_hex: str) -> bool:
        record = self.admissions.get(address_hex)
        return record is not None and "revoked_at" not in record

    def active_role(self, address_hex: str) -> Role | None:
        if not self.is_active(address_hex):
            return None
        return Role(self.admissions[address_hex]["role"])

    def active_role_by_addr(self, address: bytes) -> Role | None:
        # docstore RegistryView adapter
        return self.active_role(address.hex())

    def matrix(self) -> PermissionMatrix:
        if self._matrix is None:
            self._matrix = PermissionMatrix.from_config(
                {"grants": self.config["matrix"], "version": self.config.get("matrix_version", 1)}
            )
        return self._matrix

    def allows(self, address_hex: str, action: Action) -> bool:
        role = self.active_role(address_hex)
        return role is not None and self.matrix().allows(role, action)

    def check_permission(self, address_hex: str, action: Action) -> tuple[bool, str]:
        """allow/deny with the deny reason (NotAdmitted, Revoked, RoleForbidden)."""
        record = self.admissions.get(address_hex)
        if record is None:
            return False, "NotAdmitted"
        if "revoked_at" in record:
            return False, "Revoked"
        if not self.matrix().allows(Role(record["role"]), action):
            return False, "RoleForbidden"
        return True, ""

    def validator_set(self) -> list[str]:
        """Active admissions, sorted bytewise by address."""
        return sorted(addr for addr in self.admissions if self.is_active(addr))

    def public_key_of(self, address_hex: str) -> bytes | None:
        record = self.admissions.get(address_hex)
        if record is None:
            return None
        return bytes.fromhex(record["public_key"])

    # ---- transaction admission ----

    def verify_transaction(self, tx: dict[str, Any], height: int | None = None) -> None:
        """Raise Rejection(reason) unless the transaction may enter a block now.

        Reasons: Malformed, BadSignature, NotAdmitted, Revoked, RoleForbidden,
        StaleNonce. The system sender is only valid inside the genesis block.
        """
        try:
            sender = tx["sender"]
            nonce = tx["nonce"]
            payload = tx["payload"]
            if not isinstance(nonce, int) or isinstance(nonce, bool) or not isinstance(payload, dict):
                raise Rejection("Malformed", "bad nonce or payload")
            if not isinstance(tx["timestamp"], int):
                raise Rejection("Malformed", "bad timestamp")
        except KeyError as exc:
            raise Rejection("Malformed", f"missing field {exc}")
        if sender == SYSTEM_ADDRESS:
            if height != 0:
                raise Rejection("NotAdmitted", "system transactions are genesis-only")
        else:
            if not signature_valid(tx):
                raise Rejection("BadSignature", "signature or key binding invalid")
            allowed, reason = self.check_permission(sender, Action.ISSUE_TX)
            if not allowed:
                raise Rejection(reason, "sender may not issue transactions")
        if nonce <= self.nonces.get(sender, 0):
            raise Rejection("StaleNonce", f"nonce {nonce} already used by sender")

    # ---- application ----

    def apply_transaction(self, tx: dict[str, Any], height: int, ctx: EngineContext) -> list[dict[str, Any]]:
        """Verify and apply one transaction; returns the journal events it produced."""
        self.verify_transaction(tx, height)
        payload = tx["payload"]
        kind = payload.get("kind")
        if kind == "transfer":
            events = self._apply_transfer(tx, height)
        elif kind == "admin":
            events = self._apply_admin(tx, height, ctx)
        elif kind == "call":
            events = self._apply_call(tx, height, ctx)
        else:
            raise Rejection("Malformed", f"unknown payload kind {kind!r}")
        self.nonces[tx["sender"]] = tx["nonce"]
        return events

    def _journal(self, height: int, time: int, kind: str, event: str, actor: str,
                 args: dict[str, Any], topics: list[str], case_id: str = "") -> dict[str, Any]:
        record = {
            "seq": len(self.journal) + 1,
            "height": height,
            "time": time,
            "kind": kind,
            "case_id": case_id,
            "event": event,
            "actor": actor,
            "args": args,
            "topics": sorted(set(topics)),
        }
        self.journal.append(record)
        return record

    def _apply_transfer(self, tx: dict[str, Any], height: int) -> list[dict[str, Any]]:
        payload, sender, time = tx["payload"], tx["sender"], tx["timestamp"]
        recipient, amount, memo = payload.get("recipient"), payload.get("amount"), payload.get("memo", "")
        if not isinstance(recipient, str) or len(recipient) != 64:
            raise Rejection("Malformed", "recipient must be a 32-byte address in hex")
        if not isinstance(amount, int) or isinstance(amount, bool) or amount <= 0:
            raise Rejection("Malformed", "amount must be a positive integer")
        if self.balances.get(sender, 0) < amount:
            raise Rejection("InsufficientFunds", "sender balance too low")
        self.balances[sender] = self.balances.get(sender, 0) - amount
        self.balances[recipient] = self.balances.get(recipient, 0) + amount
        if memo:
            self.fee_payments.setdefault(memo, []).append(
                {"tx": tx_hash(tx).hex(), "from": sender, "to": recipient, "amount": amount, "time": time}
            )
        record = self._journal(
            height, time, "transfer", "value_transferred", sender,
            {"from": sender, "to": recipient, "amount": amount, "memo": memo},
            [sender, recipient], case_id=memo,
        )
        return [record]

    def _apply_admin(self, tx: dict[str, Any], height: int, ctx: EngineContext) -> list[dict[str, Any]]:
        payload, sender, time = tx["payload"], tx["sender"], tx["timestamp"]
        op = payload.get("op")
        is_system = sender == SYSTEM_ADDRESS and height == 0
        if op == "admit":
            return [self._admit(payload, sender, time, height, is_system, ctx)]
        if op == "revoke":
            return [self._revoke(payload, sender, time, height, is_system)]
        if op == "mint":
            if not is_system:
                raise Rejection("AdminForbidden", "mint is genesis-only")
            address, amount = payload["address"], payload["amount"]
            if not isinstance(amount, int) or amount < 0:
                raise Rejection("Malformed", "mint amount must be a non-negative integer")
            self.balances[address] = self.balances.get(address, 0) + amount
            return [self._journal(height, time, "admin", "minted", sender,
                                  {"address": address, "amount": amount}, [address])]
        if op == "set_config":
            if not is_system:
                raise Rejection("AdminForbidden", "set_config is genesis-only")
            matrix_config = {"grants": payload["matrix"], "version": payload.get("matrix_version", 1)}
            PermissionMatrix.from_config(matrix_config)  # validates totality
            self.config = {
                "matrix": payload["matrix"],
                "matrix_version": payload.get("matrix_version", 1),
                "matrix_hash": hash_value(matrix_config).hex(),
                "ruleset": payload["ruleset"],
                "ruleset_hash": hash_value(payload["ruleset"]).hex(),
                "fee_rate_bps": payload["fee_rate_bps"],
                "trigger_misses": payload["trigger_misses"],
            }
            self._matrix = None
            return [self._journal(height, time, "admin", "config_set", sender,
                                  {"matrix_hash": self.config["matrix_hash"],
                                   "ruleset_hash": self.config["ruleset_hash"]}, [])]
        raise Rejection("Malformed", f"unknown admin op {op!r}")

    def _admit(self, payload: dict[str, Any], sender: str, time: int, height: int,
               is_system: bool, ctx: EngineContext) -> dict[str, Any]:
        if not is_system:
            role = self.active_role(sender)
            if role not in (Role.CGI, Role.GOVERNMENT_AGENCY):
                raise Rejection("AdmitterUnauthorized", "admitter must hold CGI or GovernmentAgency role")
        address, role_name = payload["address"], payload["role"]
        public_key, attestation_cid = payload["public_key"], payload["attestation_cid"]
        try:
            Role(role_name)
        except ValueError:
            raise Rejection("BadRole", role_name)
        if self.is_active(address):
            raise Rejection("AlreadyAdmitted", address)
        if address_of(bytes.fromhex(public_key)).hex() != address:
            raise Rejection("BadAdmission", "address does not match public key")
        if ctx.docstore is not None and not ctx.docstore.exists(bytes.fromhex(attestation_cid)):
            raise Rejection("AttestationMissing", attestation_cid)
        self.admissions[address] = {
            "role": role_name,
            "attestation_cid": attestation_cid,
            "admitted_at": time,
            "public_key": public_key,
        }
        return self._journal(height, time, "admin", "actor_admitted", sender,
                             {"address": address, "role": role_name, "attestation_cid": attestation_cid},
                             [address, role_name])

    def _revoke(self, payload: dict[str, Any], sender: str, time: int, height: int,
                is_system: bool) -> dict[str, Any]:
        if not is_system:
            role = self.active_role(sender)
            if role not in (Role.CGI, Role.GOVERNMENT_AGENCY):
                raise Rejection("RevokerUnauthorized", "revoker must hold CGI or GovernmentAgency role")
        address = payload["address"]
        record = self.admissions.get(address)
        if record is None:
            raise Rejection("NotFound", address)
        if "revoked_at" in record:
            raise Rejection("AlreadyRevoked", address)
        record["revoked_at"] = time
        return self._journal(height, time, "admin", "actor_revoked", sender,
                             {"address": address, "role": record["role"]}, [address])

    def _apply_call(self, tx: dict[str, Any], height: int, ctx: EngineContext) -> list[dict[str, Any]]:
        payload, sender, time = tx["payload"], tx["sender"], tx["timestamp"]
        args = dict(payload.get("args", {}))
        if payload.get("case_id"):
            args["case_id"] = payload["case_id"]
        engine = Engine(ctx)
        case_id, events = engine.decide(self, sender, payload.get("op", ""), args, time)
        records = []
        for event in events:
            if event["event"] == st.EV_CASE_OPENED:
                case = case_from_opening(event)
                self.cases[case_id] = case
                self.case_seq += 1
            else:
                case = self.cases[case_id]
                evolve(case, event)
                self._apply_case_effects(case, event)
            records.append(
                self._journal(height, event["time"], "case", event["event"], event["actor"],
                              event["args"], event_topics(self.cases[case_id], event), case_id=case_id)
            )
        return records

    def _apply_case_effects(self, case: GuaranteeCase, event: dict[str, Any]) -> None:
        # Engine-initiated balance movements tied to case milestones.
        if event["event"] == st.EV_LOAN_DISBURSED:
            principal = event["args"]["principal"]
            if self.balances.get(case.bank, 0) < principal:
                raise Rejection("InsufficientBankBalance", "bank cannot fund the principal")
            self.balances[case.bank] -= principal
            self.balances[case.borrower] = self.balances.get(case.borrower, 0) + principal
        elif event["event"] == st.EV_PAYOUT_EXECUTED:
            payout = event["args"]["payout"]
            if self.balances.get(case.cgi, 0) < payout:
                raise Rejection("InsufficientGuaranteeFunds", "guarantee account cannot fund the payout")
            self.balances[case.cgi] -= payout
            self.balances[case.bank] = self.balances.get(case.bank, 0) + payout

    # ---- snapshots ----

    def to_state(self) -> dict[str, Any]:
        return {
            "admissions": copy.deepcopy(self.admissions),
            "balances": dict(self.balances),
            "case_seq": self.case_seq,
            "cases": {case_id: case.to_state() for case_id, case in sorted(self.cases.items())},
            "config": copy.deepcopy(self.config),
            "fee_payments": copy.deepcopy(self.fee_payments),
            "journal": copy.deepcopy(self.journal),
            "nonces": dict(self.nonces),
        }

    @classmethod
    def from_state(cls, data: dict[str, Any]) -> "LedgerState":
        state = cls()
        state.admissions = copy.deepcopy(data["admissions"])
        state.balances = dict(data["balances"])
        state.case_seq = data["case_seq"]
        state.cases = {cid: GuaranteeCase.from_state(c) for cid, c in data["cases"].items()}
        state.config = copy.deepcopy(data["config"])
        state.fee_payments = copy.deepcopy(data["fee_payments"])
        state.journal = copy.deepcopy(data["journal"])
        state.nonces = dict(data["nonces"])
        return state

    def state_root(self) -> bytes:
        return hash_value(self.to_state())

    def clone(self) -> "LedgerState":
        return LedgerState.from_state(self.to_state())
