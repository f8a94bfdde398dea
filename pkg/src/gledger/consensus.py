"""Deterministic committee consensus: one proposer per round, supermajority finality.

Every admitted actor is an equal-weight validator. A round selects its
proposer from the previous block hash and the height, the proposer filters
pending transactions through full validation, honest validators re-validate
independently and vote, and the block finalizes iff votes reach ceil(2n/3).
Failed rounds leave the height and the pending queue untouched; the retry
counter re-seeds proposer selection so liveness survives transient faults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .canon import canonical_serialize, sha256
from .errors import Rejection
from .ledger import add_vote, block_hash, make_block, tx_hash, vote_threshold
from .node import Node

HONEST = "honest"
OFFLINE = "offline"


def select_proposer(prev_block_hash: bytes, height: int, validator_set: list[str], retry: int = 0) -> str:
    """Deterministic proposer: first 8 bytes of sha256(prev_hash || height) mod n.

    Retries at the same height append the retry counter to the hashed input
    so a dead proposer does not stall the round forever.
    """
    if not validator_set:
        raise Rejection("EmptyValidatorSet")
    seed = prev_block_hash + canonical_serialize(height)
    if retry:
        seed += canonical_serialize(retry)
    index = int.from_bytes(sha256(seed)[:8], "big") % len(validator_set)
    return validator_set[index]


@dataclass
class Round:
    height: int
    proposer: str
    outcome: str  # Finalized | Failed
    votes: list[str] = field(default_factory=list)
    block: dict[str, Any] | None = None
    included: list[str] = field(default_factory=list)
    rejections: list[dict[str, str]] = field(default_factory=list)


def run_round(node: Node, behavior: dict[str, str] | None = None) -> Round:
    """Execute one consensus round over the node's pending queue.

    `behavior` maps validator addresses to "honest" (default) or "offline".
    On finalization the included transactions leave the queue and rejected
    ones are dropped with their reasons; on failure everything stays pending.
    """
    behavior = behavior or {}
    validators = node.state.validator_set()
    height = node.height()
    prev = node.head_hash()
    proposer = select_proposer(prev, height, validators, node.retry)
    if behavior.get(proposer) == OFFLINE:
        node.retry += 1
        return Round(height=height, proposer=proposer, outcome="Failed")

    scratch = node.state.clone()
    included: list[dict[str, Any]] = []
    rejections: list[dict[str, str]] = []
    for tx in node.pending:
        try:
            scratch.apply_transaction(tx, height, node.ctx)
            included.append(tx)
        except Rejection as exc:
            rejections.append({"tx": tx_hash(tx).hex(), "reason": exc.code, "detail": exc.detail})
    block = make_block(height, prev.hex(), proposer, included, scratch.state_root().hex())

    digest = block_hash(block)
    votes: list[str] = []
    # Validators re-validate independently of the proposer; the check is
    # deterministic, so one evaluation stands for every honest validator.
    revalidated = _revalidates(node, block)
    for validator in validators:
        if behavior.get(validator) == OFFLINE:
            continue
        if not revalidated:
            continue
        keypair = node.keys.get(validator)
        if keypair is None:
            continue
        add_vote(block, validator, keypair.sign(digest).hex())
        votes.append(validator)

    if len(votes) >= vote_threshold(len(validators)):
        node.append_block(block)
        included_hashes = [tx_hash(tx).hex() for tx in included]
        dropped = {r["tx"] for r in rejections} | set(included_hashes)
        node.pending = [tx for tx in node.pending if tx_hash(tx).hex() not in dropped]
        node.retry = 0
        return Round(
            height=height,
            proposer=proposer,
            outcome="Finalized",
            votes=sorted(votes),
            block=block,
            included=included_hashes,
            rejections=rejections,
        )
    node.retry += 1
    return Round(height=height, proposer=proposer, outcome="Failed", votes=sorted(votes))


def _revalidates(node: Node, block: dict[str, Any]) -> bool:
    """Independent validator check: replay the proposal against the head state."""
    state = node.state.clone()
    try:
        for tx in block["transactions"]:
            state.apply_transaction(tx, block["height"], node.ctx)
    except Rejection:
        return False
    return state.state_root().hex() == block["state_root"]
