"""HTTP gateway for human clients and scripts.

All paths live under /v1. Sessions are bound to an actor address after a
challenge-signature login; in this desk-scale deployment the service also
holds the actor keys (custodial), signs submitted decisions with them, and
offers a custodial login shortcut for the console. The ledger still
verifies every signature, so the trust boundary stays explicit.

Decision submissions are synchronous: the gateway enqueues the transaction,
drives a consensus round, and reports either the included transaction hash
or the ledger rejection reason verbatim (HTTP 409). Event delivery is
poll-based via /v1/events cursors.
"""

from __future__ import annotations

import base64
import secrets
import time as wall_clock
from typing import Any

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .accounts import verify_signature
from .consensus import run_round
from .errors import Rejection
from .ledger import call_payload, sign_transaction, transfer_payload, tx_hash
from .node import Node
from .roles import Action, Role
from .tasks import case_summary, enabled_actions

READ_ONLY_ROLES = (Role.AUDITOR, Role.GOVERNMENT_AGENCY)

_STATUS = {
    "InvalidToken": 401,
    "BadSignature": 401,
    "NotAdmitted": 403,
    "Revoked": 403,
    "Denied": 403,
    "RoleForbidden": 403,
    "RoleNotInPolicy": 403,
    "NotFound": 404,
    "UnknownCase": 404,
    "Tampered": 409,
}


def _fail(code: str, reason: str = "") -> HTTPException:
    return HTTPException(status_code=_STATUS.get(code, 409), detail={"code": code, "reason": reason})


class Gateway:
    """Server state: the node plus sessions, challenges and logical time."""

    def __init__(self, node: Node, labels: dict[str, str] | None = None, idle_seconds: int = 3600):
        self.node = node
        self.labels = labels or {}  # address hex -> human label
        self.idle_seconds = idle_seconds
        self.sessions: dict[str, dict[str, Any]] = {}
        self.challenges: dict[str, str] = {}

    def next_time(self) -> int:
        last = 0
        for block in self.node.blocks:
            for tx in block["transactions"]:
                last = max(last, tx["timestamp"])
        for tx in self.node.pending:
            last = max(last, tx["timestamp"])
        return last + 1

    def issue_challenge(self, address: str) -> str:
        challenge = secrets.token_hex(32)
        self.challenges[address] = challenge
        return challenge

    def login(self, address: str, signature: str | None, custodial: bool) -> str:
        if not self.node.state.is_active(address):
            raise Rejection("NotAdmitted", "address is not an admitted actor")
        challenge = self.challenges.get(address)
        if challenge is None:
            raise Rejection("BadSignature", "no challenge issued for this address")
        message = bytes.fromhex(challenge)
        if custodial:
            keypair = self.node.keys.get(address)
            if keypair is None:
                raise Rejection("BadSignature", "no custodial key held for this address")
            signature_bytes = keypair.sign(message)
        else:
            if not signature:
                raise Rejection("BadSignature", "signature required")
            try:
                signature_bytes = bytes.fromhex(signature)
            except ValueError:
                raise Rejection("BadSignature", "signature must be hex")
        public_key = self.node.state.public_key_of(address)
        if public_key is None or not verify_signature(public_key, message, signature_bytes):
            raise Rejection("BadSignature", "challenge signature does not verify")
        del self.challenges[address]
        token = secrets.token_hex(16)
        self.sessions[token] = {"address": address, "used": wall_clock.time()}
        return token

    def authenticate(self, token: str) -> str:
        session = self.sessions.get(token)
        if session is None:
            raise Rejection("InvalidToken", "unknown or expired token")
        if wall_clock.time() - session["used"] > self.idle_seconds:
            del self.sessions[token]
            raise Rejection("InvalidToken", "session idled out")
        session["used"] = wall_clock.time()
        return session["address"]

    # ---- actions ----

    def submit_action(self, address: str, case_id: str, operation: str, arguments: dict[str, Any]) -> dict[str, Any]:
        keypair = self.node.keys.get(address)
        if keypair is None:
            raise Rejection("Denied", "no custodial key held for this actor")
        timestamp = self.next_time()
        if operation == "pay_fee":
            case = self.node.state.cases.get(case_id)
            if case is None:
                raise Rejection("UnknownCase", case_id)
            if case.fee is None:
                raise Rejection("WrongState", "no fee is due on this case")
            amount = arguments.get("amount", case.fee["fee_amount"])
            payload = transfer_payload(case.cgi, amount, memo=case_id)
        else:
            payload = call_payload("" if case_id == "new" else case_id, operation, arguments)
        tx = sign_transaction(keypair, self.node.next_nonce(address), payload, timestamp)
        digest = tx_hash(tx).hex()
        self.node.submit(tx)
        result = run_round(self.node)
        if result.outcome != "Finalized":
            raise Rejection("RoundFailed", "consensus round did not finalize; transaction still pending")
        for rejection in result.rejections:
            if rejection["tx"] == digest:
                raise Rejection(rejection["reason"], rejection["detail"])
        new_case_id = case_id
        if case_id == "new":
            for event in self.node.state.journal[::-1]:
                if event["event"] == "case_opened" and event["height"] == result.height:
                    new_case_id = event["case_id"]
                    break
        case = self.node.state.cases.get(new_case_id)
        return {
            "tx_hash": digest,
            "height": result.height,
            "case_id": new_case_id,
            "case_state": case.state.value if case else None,
        }

    # ---- queries ----

    def case_view(self, address: str, case_id: str) -> dict[str, Any]:
        case = self.node.state.cases.get(case_id)
        if case is None:
            raise Rejection("NotFound", case_id)
        role = self.node.state.active_role(address)
        is_party = address in (case.borrower, case.bank, case.cgi)
        if not is_party and role not in READ_ONLY_ROLES:
            raise Rejection("Denied", "not a case party")
        view = case.to_state()
        view["party_labels"] = {
            "borrower": self.labels.get(case.borrower, case.borrower[:12]),
            "bank": self.labels.get(case.bank, case.bank[:12]),
            "cgi": self.labels.get(case.cgi, case.cgi[:12]),
        }
        return view

    def events_page(self, address: str, cursor: int, limit: int = 200) -> dict[str, Any]:
        role = self.node.state.active_role(address)
        if role is None:
            raise Rejection("NotAdmitted", "address is not an admitted actor")
        visible = []
        for event in self.node.state.journal:
            if event["seq"] <= cursor:
                continue
            if self._event_visible(event, address, role):
                visible.append(event)
            if len(visible) >= limit:
                break
        next_cursor = visible[-1]["seq"] if visible else cursor
        return {"events": visible, "cursor": next_cursor, "head_seq": len(self.node.state.journal)}

    def _event_visible(self, event: dict[str, Any], address: str, role: Role) -> bool:
        if role in READ_ONLY_ROLES:
            return True
        if address in event["topics"] or role.value in event["topics"]:
            return True
        case = self.node.state.cases.get(event.get("case_id", ""))
        if case is not None and address in (case.borrower, case.bank, case.cgi):
            return True
        return event["actor"] == address


class LoginBody(BaseModel):
    address: str
    signature: str | None = None
    custodial: bool = False


class ActionBody(BaseModel):
    operation: str
    arguments: dict[str, Any] = {}


def create_app(gateway: Gateway) -> FastAPI:
    app = FastAPI(title="guarantee ledger gateway", version="1")
    # the console is served as static files from elsewhere; desk-scale open CORS
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def auth(authorization: str = Header(default="")) -> str:
        token = authorization.removeprefix("Bearer ").strip()
        try:
            return gateway.authenticate(token)
        except Rejection as exc:
            raise _fail(exc.code, exc.detail)

    def guard(address: str, action: Action) -> None:
        allowed, reason = gateway.node.state.check_permission(address, action)
        if not allowed:
            raise _fail(reason or "Denied", f"{action.value} denied")

    @app.post("/v1/login")
    def login(body: LoginBody):
        try:
            if body.signature is None and not body.custodial:
                if not gateway.node.state.is_active(body.address):
                    raise Rejection("NotAdmitted", "address is not an admitted actor")
                return {"challenge": gateway.issue_challenge(body.address)}
            token = gateway.login(body.address, body.signature, body.custodial)
        except Rejection as exc:
            raise _fail(exc.code, exc.detail)
        role = gateway.node.state.active_role(body.address)
        return {
            "token": token,
            "address": body.address,
            "role": role.value if role else None,
            "label": gateway.labels.get(body.address, ""),
        }

    @app.get("/v1/tasks")
    def tasks(address: str = Depends(auth)):
        role = gateway.node.state.active_role(address)
        items = [t.to_json() for t in enabled_actions(gateway.node, address)]
        summaries = []
        if role in READ_ONLY_ROLES:
            summaries = [case_summary(c) for _, c in sorted(gateway.node.state.cases.items())]
        return {"tasks": items, "summaries": summaries, "role": role.value if role else None}

    @app.post("/v1/cases/{case_id}/actions")
    def act(case_id: str, body: ActionBody, address: str = Depends(auth)):
        try:
            return gateway.submit_action(address, case_id, body.operation, body.arguments)
        except Rejection as exc:
            raise _fail(exc.code, exc.detail)

    @app.get("/v1/cases/{case_id}")
    def case(case_id: str, address: str = Depends(auth)):
        try:
            return gateway.case_view(address, case_id)
        except Rejection as exc:
            raise _fail(exc.code, exc.detail)

    @app.get("/v1/ledger/blocks")
    def blocks(
        address: str = Depends(auth),
        frm: int = Query(default=0, alias="from"),
        to: int = Query(default=1 << 30),
    ):
        guard(address, Action.READ_LEDGER)
        lo, hi = max(0, frm), min(to, len(gateway.node.blocks) - 1)
        return {"blocks": gateway.node.blocks[lo : hi + 1], "height": len(gateway.node.blocks)}

    @app.get("/v1/accounts/{addr}/history")
    def history(addr: str, address: str = Depends(auth)):
        guard(address, Action.READ_LEDGER)
        return {"transactions": gateway.node.account_history(addr)}

    @app.get("/v1/events")
    def events(address: str = Depends(auth), cursor: int = 0):
        try:
            return gateway.events_page(address, cursor)
        except Rejection as exc:
            raise _fail(exc.code, exc.detail)

    @app.get("/v1/docs/{cid}")
    def doc(cid: str, address: str = Depends(auth)):
        try:
            raw = bytes.fromhex(cid)
        except ValueError:
            raise _fail("NotFound", "content id must be hex")
        try:
            plaintext = gateway.node.docstore.get(
                raw, bytes.fromhex(address), _RegistryAdapter(gateway.node), gateway.node.keyring
            )
        except Rejection as exc:
            raise _fail(exc.code, exc.detail)
        try:
            text = plaintext.decode("utf-8")
        except UnicodeDecodeError:
            text = ""
        return {"cid": cid, "content_base64": base64.b64encode(plaintext).decode(), "text": text}

    return app


class _RegistryAdapter:
    def __init__(self, node: Node):
        self.node = node

    def active_role(self, address: bytes) -> Role | None:
        return self.node.state.active_role(address.hex())
