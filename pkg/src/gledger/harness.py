"""Scripted multi-party scenario runner with replayable traces.

A scenario file declares actors, network config and an ordered step list
(admissions, transaction submissions, consensus rounds, expectations). Runs
are fully deterministic for a fixed (scenario, seed): actor keys derive from
the scenario seed, logical time is the step counter, and the trace hash
covers every step's resulting events and state root.

Argument conveniences resolved at submission time:
  "@label"                    -> that actor's address (hex)
  {"_doc": {"text","policy"}} -> document stored first, replaced by its cid
  "_auto"                     -> engine-derived cid (certificates, grants)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .accounts import Keypair, generate_account
from .canon import canonical_serialize, from_hex, hash_value, sha256
from .consensus import Round, run_round
from .contracts.engine import certificate_cid_for
from .docstore import DocStore, RoleKeyring
from .errors import Rejection
from .ledger import (
    admin_payload,
    call_payload,
    load_chain,
    sign_transaction,
    system_transaction,
    transfer_payload,
)
from .node import NetworkConfig, Node, verify_blocks
from .roles import PermissionMatrix, Role

ATTESTATION_POLICY = (Role.CGI, Role.GOVERNMENT_AGENCY)
STEP_KINDS = ("admit", "submit", "round", "expect")


@dataclass
class Scenario:
    name: str
    seed: bytes
    actors: list[dict[str, Any]]
    config: dict[str, Any]
    steps: list[dict[str, Any]]

    def labels(self) -> list[str]:
        return [a["label"] for a in self.actors]


@dataclass
class Trace:
    entries: list[dict[str, Any]]
    final_state_root: str
    trace_hash: str


class ExpectationFailed(Exception):
    def __init__(self, step: int, detail: str):
        self.step = step
        self.detail = detail
        super().__init__(f"step {step}: {detail}")


class StepRejected(Exception):
    def __init__(self, step: int, reason: str):
        self.step = step
        self.reason = reason
        super().__init__(f"step {step}: {reason}")


def load_scenario(path: Path) -> Scenario:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise Rejection("ParseError", f"line {exc.lineno}: {exc.msg}")
    return parse_scenario(data)


def parse_scenario(data: dict[str, Any]) -> Scenario:
    for key in ("name", "seed", "actors", "steps"):
        if key not in data:
            raise Rejection("ParseError", f"missing top-level key {key!r}")
    try:
        seed = from_hex(data["seed"])
    except ValueError:
        raise Rejection("ParseError", "seed must be hex")
    if len(seed) != 32:
        raise Rejection("ParseError", "seed must be 32 bytes of hex")
    labels: set[str] = set()
    roles_present: set[str] = set()
    for actor in data["actors"]:
        label = actor.get("label")
        if not label or label in labels:
            raise Rejection("ParseError", f"duplicate or missing actor label {label!r}")
        labels.add(label)
        try:
            Role(actor.get("role"))
        except ValueError:
            raise Rejection("BadRole", str(actor.get("role")))
        roles_present.add(actor["role"])
        if not isinstance(actor.get("balance", 0), int):
            raise Rejection("ParseError", f"balance for {label} must be an integer")
    if Role.CGI.value not in roles_present or Role.GOVERNMENT_AGENCY.value not in roles_present:
        raise Rejection("ParseError", "scenario needs at least one CGI and one GovernmentAgency actor")
    for index, step in enumerate(data["steps"]):
        kinds = [k for k in STEP_KINDS if k in step]
        if len(kinds) != 1:
            raise Rejection("ParseError", f"step {index} must have exactly one of {STEP_KINDS}")
        for label in _referenced_labels(step):
            if label not in labels:
                raise Rejection("UnknownLabel", f"step {index}: {label}")
    return Scenario(
        name=data["name"],
        seed=seed,
        actors=list(data["actors"]),
        config=dict(data.get("config", {})),
        steps=list(data["steps"]),
    )


def _referenced_labels(step: dict[str, Any]) -> list[str]:
    labels: list[str] = []
    if "admit" in step:
        labels += [step["admit"].get("target", ""), step["admit"].get("by", "")]
    if "submit" in step:
        labels.append(step["submit"].get("actor", ""))
        labels += _walk_label_refs(step["submit"])
    if "round" in step:
        labels += step["round"].get("offline", [])
    if "expect" in step and "balance" in step["expect"]:
        labels.append(step["expect"]["balance"].get("actor", ""))
    return [l for l in labels if l]


def _walk_label_refs(value: Any) -> list[str]:
    if isinstance(value, str) and value.startswith("@"):
        return [value[1:]]
    if isinstance(value, list):
        return [l for item in value for l in _walk_label_refs(item)]
    if isinstance(value, dict):
        return [l for item in value.values() for l in _walk_label_refs(item)]
    return []


class ScenarioRun:
    """One deterministic execution of a scenario."""

    def __init__(self, scenario: Scenario, data_dir: Path | None = None, seed: bytes | None = None):
        self.scenario = scenario
        self.seed = seed if seed is not None else scenario.seed
        self.data_dir = data_dir
        docstore = DocStore(data_dir / "docstore") if data_dir else DocStore()
        keyring = RoleKeyring.derive(self.seed)
        matrix = (
            PermissionMatrix.from_config(scenario.config["matrix"])
            if "matrix" in scenario.config
            else PermissionMatrix.default()
        )
        self.net = NetworkConfig(
            seed=self.seed,
            matrix=matrix,
            ruleset=scenario.config.get("ruleset", []),
            fee_rate_bps=scenario.config.get("fee_rate_bps", 100),
            trigger_misses=scenario.config.get("trigger_misses", 3),
        )
        self.node = Node(self.net, docstore, keyring)
        self.keypairs: dict[str, Keypair] = {}
        self.attestations: dict[str, str] = {}
        self.tx_steps: dict[str, tuple[int, str | None]] = {}  # tx hash -> (step, expected rejection)
        self.after_round = None  # optional callback(self, round) for audits

    def actor_key(self, label: str) -> Keypair:
        return self.keypairs[label]

    def address(self, label: str) -> str:
        return self.keypairs[label].address_hex

    def _setup(self) -> None:
        for actor in self.scenario.actors:
            label = actor["label"]
            keypair = generate_account(sha256(self.seed + b"|actor|" + label.encode()))
            self.keypairs[label] = keypair
            self.node.register_key(keypair)
            dossier = canonical_serialize({"kind": "identity_dossier", "label": label, "role": actor["role"]})
            cid = self.node.docstore.put(dossier, ATTESTATION_POLICY, self.node.keyring)
            self.attestations[label] = cid.hex()
        genesis_txs = [system_transaction(1, self.net.set_config_payload())]
        nonce = 2
        for actor in self.scenario.actors:
            genesis_txs.append(
                system_transaction(
                    nonce,
                    admin_payload("mint", address=self.address(actor["label"]), amount=actor.get("balance", 0)),
                )
            )
            nonce += 1
        first_cgi = next(a["label"] for a in self.scenario.actors if a["role"] == Role.CGI.value)
        first_gov = next(a["label"] for a in self.scenario.actors if a["role"] == Role.GOVERNMENT_AGENCY.value)
        for label in (first_cgi, first_gov):
            genesis_txs.append(system_transaction(nonce, self._admit_payload(label)))
            nonce += 1
        self.node.bootstrap(genesis_txs)
        self.genesis_admitted = {first_cgi, first_gov}

    def _admit_payload(self, label: str) -> dict[str, Any]:
        actor = next(a for a in self.scenario.actors if a["label"] == label)
        keypair = self.keypairs[label]
        return admin_payload(
            "admit",
            address=keypair.address_hex,
            role=actor["role"],
            attestation_cid=self.attestations[label],
            public_key=keypair.account.public_key.hex(),
        )

    # ---- argument resolution ----

    def _resolve_args(self, op: str, case_id: str, value: Any) -> Any:
        if isinstance(value, str):
            if value.startswith("@"):
                return self.address(value[1:])
            if value == "_application_cid" and case_id in self.node.state.cases:
                return self.node.state.cases[case_id].application_cid
            return value
        if isinstance(value, list):
            return [self._resolve_args(op, case_id, item) for item in value]
        if isinstance(value, dict):
            if "_doc" in value:
                spec = value["_doc"]
                policy = [Role(r) for r in spec.get("policy", [Role.BORROWER.value, Role.CGI.value])]
                cid = self.node.docstore.put(spec["text"].encode(), policy, self.node.keyring)
                return cid.hex()
            return {k: self._resolve_args(op, case_id, v) for k, v in value.items()}
        return value

    def _resolve_auto(self, op: str, case_id: str, args: dict[str, Any]) -> dict[str, Any]:
        if op == "issue_certificate" and args.get("certificate_cid") == "_auto":
            case = self.node.state.cases[case_id]
            args["certificate_cid"] = certificate_cid_for(case, self.node.docstore, self.node.keyring).hex()
        if op == "grant_to_bank" and args.get("shared_cid") == "_auto":
            original = bytes.fromhex(args["content_id"])
            args["shared_cid"] = self.node.docstore.restore_with_policy(
                original, [Role.BANK], self.node.keyring
            ).hex()
        return args

    # ---- step execution ----

    def run(self) -> Trace:
        self._setup()
        entries: list[dict[str, Any]] = []
        time = 0
        for index, step in enumerate(self.scenario.steps):
            time = index + 1
            journal_before = len(self.node.state.journal)
            info: dict[str, Any] = {}
            if "admit" in step:
                self._step_admit(step["admit"], index, time)
            elif "submit" in step:
                self._step_submit(step["submit"], index, time)
            elif "round" in step:
                info = self._step_round(step["round"], index)
            elif "expect" in step:
                self._step_expect(step["expect"], index)
            entries.append(
                {
                    "step": index,
                    "events": [dict(e) for e in self.node.state.journal[journal_before:]],
                    "state_root": self.node.state.state_root().hex(),
                    **info,
                }
            )
        final_root = self.node.state.state_root().hex()
        trace_hash = hash_value(entries).hex()
        if self.data_dir is not None:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self.node.save(self.data_dir / "chain.jsonl")
            self._write_config_dir()
        return Trace(entries=entries, final_state_root=final_root, trace_hash=trace_hash)

    def _write_config_dir(self) -> None:
        config_dir = self.data_dir / "config"
        config_dir.mkdir(exist_ok=True)
        (config_dir / "permission_matrix.json").write_bytes(
            canonical_serialize(self.net.matrix.to_config()) + b"\n"
        )
        (config_dir / "ruleset.json").write_bytes(canonical_serialize(self.net.ruleset) + b"\n")
        (config_dir / "network.json").write_bytes(
            canonical_serialize(
                {
                    "seed": self.seed.hex(),
                    "fee_rate_bps": self.net.fee_rate_bps,
                    "trigger_misses": self.net.trigger_misses,
                    "actors": {label: self.address(label) for label in self.scenario.labels()},
                }
            )
            + b"\n"
        )

    def _step_admit(self, spec: dict[str, Any], step: int, time: int) -> None:
        target, by = spec["target"], spec["by"]
        keypair = self.keypairs[by]
        tx = sign_transaction(
            keypair, self.node.next_nonce(keypair.address_hex), self._admit_payload(target), time
        )
        self.tx_steps[self.node.submit(tx)] = (step, spec.get("expect_rejection"))

    def _step_submit(self, spec: dict[str, Any], step: int, time: int) -> None:
        keypair = self.keypairs[spec["actor"]]
        if "transfer" in spec:
            t = spec["transfer"]
            to = self._resolve_args("", "", t["to"])
            payload = transfer_payload(to, t["amount"], memo=t.get("memo", ""))
        elif "call" in spec:
            c = spec["call"]
            case_id = c.get("case", "")
            args = self._resolve_args(c["op"], case_id, dict(c.get("args", {})))
            args = self._resolve_auto(c["op"], case_id, args)
            payload = call_payload(case_id, c["op"], args)
        elif "admin" in spec:
            a = dict(spec["admin"])
            op = a.pop("op")
            if op == "revoke":
                payload = admin_payload("revoke", address=self.address(a["target"]))
            elif op == "admit":
                payload = self._admit_payload(a["target"])
            else:
                raise Rejection("ParseError", f"step {step}: unsupported admin op {op!r}")
        else:
            raise Rejection("ParseError", f"step {step}: submit needs transfer, call or admin")
        tx = sign_transaction(keypair, self.node.next_nonce(keypair.address_hex), payload, time)
        self.tx_steps[self.node.submit(tx)] = (step, spec.get("expect_rejection"))

    def _step_round(self, spec: dict[str, Any], step: int) -> dict[str, Any]:
        behavior = {self.address(label): "offline" for label in spec.get("offline", [])}
        result: Round = run_round(self.node, behavior)
        if self.after_round is not None:
            self.after_round(self, result)
        if result.outcome == "Finalized":
            for rejection in result.rejections:
                origin, expected = self.tx_steps.get(rejection["tx"], (step, None))
                if expected is None:
                    raise StepRejected(origin, rejection["reason"])
                if expected != rejection["reason"]:
                    raise ExpectationFailed(
                        origin, f"expected rejection {expected}, got {rejection['reason']}"
                    )
            for included in result.included:
                origin, expected = self.tx_steps.get(included, (step, None))
                if expected is not None:
                    raise ExpectationFailed(origin, f"expected rejection {expected}, but tx was included")
        return {
            "round": {
                "outcome": result.outcome,
                "proposer": result.proposer,
                "votes": result.votes,
                "height": result.height,
                "rejections": [
                    {"tx": r["tx"], "reason": r["reason"]} for r in result.rejections
                ],
            }
        }

    def _step_expect(self, spec: dict[str, Any], step: int) -> None:
        if "case" in spec and "state" in spec:
            case = self.node.state.cases.get(spec["case"])
            if case is None:
                raise ExpectationFailed(step, f"unknown case {spec['case']}")
            if case.state.value != spec["state"]:
                raise ExpectationFailed(step, f"case {spec['case']} is {case.state.value}, expected {spec['state']}")
        elif "balance" in spec:
            actor, amount = spec["balance"]["actor"], spec["balance"]["amount"]
            actual = self.node.state.balances.get(self.address(actor), 0)
            if actual != amount:
                raise ExpectationFailed(step, f"{actor} balance {actual}, expected {amount}")
        elif "event" in spec:
            case = self.node.state.cases.get(spec["event"]["case"])
            if case is None:
                raise ExpectationFailed(step, f"unknown case {spec['event']['case']}")
            names = [e["event"] for e in case.event_log]
            if spec["event"]["name"] not in names:
                raise ExpectationFailed(step, f"event {spec['event']['name']} not in case log {names}")
        else:
            raise ExpectationFailed(step, f"unsupported expectation {sorted(spec)}")


def run_scenario(scenario: Scenario, data_dir: Path | None = None, seed: bytes | None = None) -> tuple[Trace, Node]:
    run = ScenarioRun(scenario, data_dir=data_dir, seed=seed)
    trace = run.run()
    return trace, run.node


def replay_assert(chain_path: Path, expected_root: str) -> None:
    """Re-verify a persisted chain and compare its replayed root; raises on mismatch."""
    blocks = load_chain(chain_path)
    result = verify_blocks(blocks)
    if not result.ok:
        raise Rejection("ChainInvalid", f"height={result.height} reason={result.reason}")
    actual = result.state.state_root().hex()
    if actual != expected_root:
        raise Rejection("RootMismatch", f"replayed {actual}, expected {expected_root}")


def load_node(data_dir: Path) -> tuple[Node, dict[str, str]]:
    """Rebuild a node (verified chain, docstore, custodial keys) from a data directory.

    Layout: chain.jsonl, docstore/, config/network.json. Returns the node and
    an address -> actor label map.
    """
    network = json.loads((data_dir / "config" / "network.json").read_text())
    seed = from_hex(network["seed"])
    docstore = DocStore(data_dir / "docstore")
    keyring = RoleKeyring.derive(seed)
    blocks = load_chain(data_dir / "chain.jsonl")
    probe = Node(NetworkConfig(seed=seed, matrix=PermissionMatrix.default()), docstore, keyring)
    result = verify_blocks(blocks, probe.ctx)
    if not result.ok:
        raise Rejection("ChainInvalid", f"height={result.height} reason={result.reason}")
    state = result.state
    net = NetworkConfig(
        seed=seed,
        matrix=PermissionMatrix.from_config({"grants": state.config["matrix"],
                                             "version": state.config.get("matrix_version", 1)}),
        ruleset=state.config["ruleset"],
        fee_rate_bps=state.config["fee_rate_bps"],
        trigger_misses=state.config["trigger_misses"],
    )
    node = Node(net, docstore, keyring)
    node.blocks = blocks
    node.state = state
    labels: dict[str, str] = {}
    for label in network.get("actors", {}):
        keypair = generate_account(sha256(seed + b"|actor|" + label.encode()))
        node.register_key(keypair)
        labels[keypair.address_hex] = label
    return node, labels
