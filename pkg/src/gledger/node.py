"""A single logical network node: finalized chain, state, stores and keys.

Desk-scale deployment means one process holds the chain, the document store
and (custodially) the actors' keys; the ledger still verifies every
signature, so the trust boundary stays explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .accounts import Keypair, verify_signature
from .canon import ZERO_HASH
from .contracts.engine import EngineContext
from .docstore import DocStore, RoleKeyring
from .errors import Rejection
from .ledger import (
    SYSTEM_ADDRESS,
    admin_payload,
    block_hash,
    load_chain,
    make_block,
    save_chain,
    tx_hash,
    tx_root,
    vote_threshold,
)
from .roles import PermissionMatrix
from .state import LedgerState


@dataclass
class NetworkConfig:
    seed: bytes
    matrix: PermissionMatrix
    ruleset: list[dict[str, Any]] = field(default_factory=list)
    fee_rate_bps: int = 100
    trigger_misses: int = 3

    def set_config_payload(self) -> dict[str, Any]:
        return admin_payload(
            "set_config",
            matrix=self.matrix.table,
            matrix_version=self.matrix.version,
            ruleset=self.ruleset,
            fee_rate_bps=self.fee_rate_bps,
            trigger_misses=self.trigger_misses,
        )


@dataclass
class VerifyResult:
    ok: bool
    height: int | None = None
    reason: str | None = None
    state: LedgerState | None = None


class Node:
    def __init__(self, config: NetworkConfig, docstore: DocStore | None = None,
                 keyring: RoleKeyring | None = None):
        self.config = config
        self.docstore = docstore if docstore is not None else DocStore()
        self.keyring = keyring if keyring is not None else RoleKeyring.derive(config.seed)
        self.ctx = EngineContext(self.docstore, self.keyring)
        self.state = LedgerState()
        self.blocks: list[dict[str, Any]] = []
        self.pending: list[dict[str, Any]] = []
        self.keys: dict[str, Keypair] = {}
        self.retry = 0

    # ---- key custody ----

    def register_key(self, keypair: Keypair) -> None:
        self.keys[keypair.address_hex] = keypair

    def next_nonce(self, address_hex: str) -> int:
        pending_max = max(
            (tx["nonce"] for tx in self.pending if tx["sender"] == address_hex),
            default=0,
        )
        return max(self.state.nonces.get(address_hex, 0), pending_max) + 1

    # ---- genesis ----

    def bootstrap(self, genesis_txs: list[dict[str, Any]]) -> dict[str, Any]:
        """Build and commit the genesis block from system transactions."""
        if self.blocks:
            raise Rejection("AlreadyBootstrapped")
        state = LedgerState()
        for tx in genesis_txs:
            state.apply_transaction(tx, 0, self.ctx)
        block = make_block(0, ZERO_HASH.hex(), SYSTEM_ADDRESS, genesis_txs, state.state_root().hex())
        self.state = state
        self.blocks = [block]
        return block

    # ---- chain growth ----

    def head_hash(self) -> bytes:
        return block_hash(self.blocks[-1])

    def height(self) -> int:
        return len(self.blocks)

    def submit(self, tx: dict[str, Any]) -> str:
        self.pending.append(tx)
        return tx_hash(tx).hex()

    def append_block(self, block: dict[str, Any]) -> None:
        """Validate a finalized block against the head and commit it."""
        new_state = _checked_apply(self.state, block, self.head_hash().hex(), self.height(), self.ctx)
        self.blocks.append(block)
        self.state = new_state

    # ---- audit ----

    def verify_chain(self) -> VerifyResult:
        return verify_blocks(self.blocks, self.ctx)

    def account_history(self, address_hex: str) -> list[dict[str, Any]]:
        """Transactions mentioning the address (sender, recipient or registry target), chain order."""
        out = []
        for block in self.blocks:
            for tx in block["transactions"]:
                payload = tx["payload"]
                mentioned = tx["sender"] == address_hex
                mentioned = mentioned or payload.get("recipient") == address_hex
                mentioned = mentioned or (payload.get("kind") == "admin" and payload.get("address") == address_hex)
                if mentioned:
                    out.append(tx)
        return out

    # ---- persistence ----

    def save(self, chain_path: Path) -> None:
        save_chain(self.blocks, chain_path)

    @classmethod
    def load(cls, config: NetworkConfig, chain_path: Path,
             docstore: DocStore | None = None, keyring: RoleKeyring | None = None) -> "Node":
        node = cls(config, docstore, keyring)
        blocks = load_chain(chain_path)
        result = verify_blocks(blocks, node.ctx)
        if not result.ok:
            raise Rejection("ChainInvalid", f"height={result.height} reason={result.reason}")
        node.blocks = blocks
        node.state = result.state
        return node


def _checked_apply(state: LedgerState, block: dict[str, Any], expected_prev: str,
                   expected_height: int, ctx: EngineContext) -> LedgerState:
    """All block admission checks; returns the post-block state or raises."""
    if block.get("height") != expected_height:
        raise Rejection("PrevHashMismatch", f"expected height {expected_height}")
    if block.get("prev_hash") != expected_prev:
        raise Rejection("PrevHashMismatch", "prev_hash does not match the head block")
    # genesis has no votes covering its header, so its proposer is pinned
    if expected_height == 0 and block.get("proposer") != SYSTEM_ADDRESS:
        raise Rejection("BadProposer", "genesis proposer must be the system address")
    txs = block.get("transactions", [])
    if tx_root(txs).hex() != block.get("tx_root"):
        raise Rejection("TxRootMismatch", "transaction root does not match contents")
    _check_votes(state, block, expected_height)
    new_state = state.clone()
    for tx in txs:
        try:
            new_state.apply_transaction(tx, expected_height, ctx)
        except Rejection as exc:
            raise Rejection("ContainsInvalidTransaction", f"{tx_hash(tx).hex()[:16]}: {exc.code}")
    if new_state.state_root().hex() != block.get("state_root"):
        raise Rejection("StateRootMismatch", "replayed state root differs")
    return new_state


def _check_votes(state: LedgerState, block: dict[str, Any], height: int) -> None:
    """Finality votes: all well-formed and from current validators, count >= ceil(2n/3).

    Any malformed or foreign vote marks the block invalid outright; finalized
    blocks carry exactly the votes consensus collected, so a stray entry is
    tampering, not noise.
    """
    validators = state.validator_set()
    votes = block.get("finality_votes", [])
    seen: set[str] = set()
    digest = block_hash(block)
    for vote in votes:
        if not (isinstance(vote, list) and len(vote) == 2):
            raise Rejection("InvalidVote", "malformed vote entry")
        address, signature = vote
        if address in seen:
            raise Rejection("InvalidVote", f"duplicate vote from {address[:16]}")
        if address not in validators:
            raise Rejection("InvalidVote", f"vote from non-validator {address[:16]}")
        public_key = state.public_key_of(address)
        try:
            sig = bytes.fromhex(signature)
        except ValueError:
            raise Rejection("InvalidVote", "vote signature is not hex")
        if public_key is None or not verify_signature(public_key, digest, sig):
            raise Rejection("InvalidVote", f"bad vote signature from {address[:16]}")
        seen.add(address)
    if len(seen) < vote_threshold(len(validators)):
        raise Rejection(
            "InsufficientVotes", f"{len(seen)} of {len(validators)} validators, need {vote_threshold(len(validators))}"
        )


def verify_blocks(blocks: list[dict[str, Any]], ctx: EngineContext | None = None) -> VerifyResult:
    """Re-verify a chain from genesis: links, roots, signatures, votes, state replay."""
    ctx = ctx or EngineContext()
    state = LedgerState()
    if not blocks:
        return VerifyResult(ok=False, height=0, reason="EmptyChain")
    prev = ZERO_HASH.hex()
    for expected_height, block in enumerate(blocks):
        try:
            state = _checked_apply(state, block, prev, expected_height, ctx)
        except Rejection as exc:
            return VerifyResult(ok=False, height=expected_height, reason=exc.code)
        except Exception as exc:  # malformed structures surface as verification failures
            return VerifyResult(ok=False, height=expected_height, reason=f"Malformed:{type(exc).__name__}")
        prev = block_hash(block).hex()
    return VerifyResult(ok=True, state=state)
