"""Operator command line: network lifecycle, scenario runs, audit, serving.

Every command prints one machine-parsable summary line: `result: ...` on
success, `error: ...` on failure (exit code 1).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .canon import from_hex
from .errors import Rejection
from .harness import (
    ExpectationFailed,
    StepRejected,
    load_node,
    load_scenario,
    parse_scenario,
    replay_assert,
    run_scenario,
)
from .ledger import load_chain
from .node import verify_blocks

DATA_DIR_OPTION = click.option(
    "--data-dir",
    type=click.Path(path_type=Path),
    default=Path("./data"),
    envvar="GL_DATA_DIR",
    show_default=True,
    help="ledger data directory (chain.jsonl, docstore/, config/)",
)


def _error(message: str) -> None:
    click.echo(f"error: {message}")
    sys.exit(1)


@click.group()
def main() -> None:
    """Desk-scale credit-guarantee ledger."""


@main.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path, exists=True), required=True,
              help="genesis config: scenario-format JSON (steps optional, ignored)")
@DATA_DIR_OPTION
def init(config_path: Path, data_dir: Path) -> None:
    """Write a fresh genesis chain and config into the data directory."""
    try:
        data = json.loads(config_path.read_text())
        data.setdefault("steps", [])
        scenario = parse_scenario({**data, "steps": []})
        trace, node = run_scenario(scenario, data_dir=data_dir)
    except (Rejection, OSError, ValueError) as exc:
        _error(str(exc))
    click.echo(f"result: initialized height={node.height()} state_root={trace.final_state_root}")


@main.command("run-scenario")
@click.argument("scenario_file", type=click.Path(path_type=Path, exists=True))
@DATA_DIR_OPTION
@click.option("--seed", "seed_hex", default=None, help="hex seed overriding the scenario seed")
@click.option("--persist/--no-persist", default=True, show_default=True,
              help="write chain, docstore and config into the data directory")
def run_scenario_cmd(scenario_file: Path, data_dir: Path, seed_hex: str | None, persist: bool) -> None:
    """Execute a scenario; exit 0 iff every expectation passes."""
    try:
        scenario = load_scenario(scenario_file)
        seed = from_hex(seed_hex) if seed_hex else None
        trace, node = run_scenario(scenario, data_dir=data_dir if persist else None, seed=seed)
    except ExpectationFailed as exc:
        _error(f"expectation failed at step {exc.step}: {exc.detail}")
    except StepRejected as exc:
        _error(f"step {exc.step} rejected: {exc.reason}")
    except Rejection as exc:
        _error(str(exc))
    click.echo(f"scenario: {scenario.name}")
    click.echo(f"steps: {len(scenario.steps)}  blocks: {node.height()}")
    click.echo(f"result: trace_hash={trace.trace_hash} state_root={trace.final_state_root}")


@main.command()
@click.argument("chain_file", type=click.Path(path_type=Path, exists=True))
def verify(chain_file: Path) -> None:
    """Re-verify every link, signature, vote and the replayed state root."""
    try:
        blocks = load_chain(chain_file)
    except Rejection as exc:
        _error(f"fail height=? reason={exc.code} {exc.detail}")
    result = verify_blocks(blocks)
    if not result.ok:
        _error(f"fail height={result.height} reason={result.reason}")
    click.echo(f"result: ok height={len(blocks)} state_root={result.state.state_root().hex()}")


@main.command()
@click.argument("chain_file", type=click.Path(path_type=Path, exists=True))
@click.argument("expected_root")
def replay(chain_file: Path, expected_root: str) -> None:
    """Audit replay: verify the chain and compare its state root to EXPECTED_ROOT."""
    try:
        replay_assert(chain_file, expected_root)
    except Rejection as exc:
        _error(f"{exc.code} {exc.detail}")
    click.echo(f"result: ok state_root={expected_root}")


@main.group()
def inspect() -> None:
    """Human-readable dumps of ledger content."""


@inspect.command("case")
@click.argument("case_id")
@DATA_DIR_OPTION
def inspect_case(case_id: str, data_dir: Path) -> None:
    try:
        node, labels = load_node(data_dir)
    except (Rejection, OSError, KeyError) as exc:
        _error(str(exc))
    case = node.state.cases.get(case_id)
    if case is None:
        _error(f"unknown case {case_id}")
    view = case.to_state()
    click.echo(f"case {case_id} [{view['pathway']}] state={view['state']}")
    for side in ("borrower", "bank", "cgi"):
        address = view[side]
        click.echo(f"  {side}: {labels.get(address, '')} {address}")
    click.echo(f"  principal: {view['principal']}  kyc: {view['kyc']['status']}")
    if case.risk_line:
        line = case.risk_line
        click.echo(f"  risk line: {line['coverage_bps']} bps {line['seniority']} cap={line['cap']}")
    if case.fee:
        click.echo(f"  fee: {case.fee['fee_amount']} paid={case.fee['paid']}")
    if case.loan:
        click.echo(f"  loan: outstanding={case.loan['outstanding']} missed_run={case.loan['consecutive_missed']}")
    if case.claim:
        click.echo(f"  claim: {case.claim['claimed_amount']} eligibility={case.claim['eligibility']}")
    click.echo("  events:")
    for event in case.event_log:
        click.echo(f"    t={event['time']:>4} {event['event']:28s} by {labels.get(event['actor'], event['actor'][:12])}")
    click.echo(f"result: case={case_id} state={view['state']}")


@inspect.command("block")
@click.argument("height", type=int)
@DATA_DIR_OPTION
def inspect_block(height: int, data_dir: Path) -> None:
    try:
        node, labels = load_node(data_dir)
    except (Rejection, OSError, KeyError) as exc:
        _error(str(exc))
    if height < 0 or height >= len(node.blocks):
        _error(f"no block at height {height}")
    block = node.blocks[height]
    click.echo(f"block {height} proposer={labels.get(block['proposer'], block['proposer'][:12])}")
    click.echo(f"  prev_hash:  {block['prev_hash']}")
    click.echo(f"  tx_root:    {block['tx_root']}")
    click.echo(f"  state_root: {block['state_root']}")
    click.echo(f"  votes: {len(block['finality_votes'])}")
    for tx in block["transactions"]:
        payload = tx["payload"]
        kind = payload["kind"]
        detail = payload.get("op", "") if kind != "transfer" else f"{payload['amount']} -> {payload['recipient'][:12]}"
        click.echo(f"  tx nonce={tx['nonce']} from={labels.get(tx['sender'], tx['sender'][:12])} {kind} {detail}")
    click.echo(f"result: block={height} txs={len(block['transactions'])}")


@main.command()
@DATA_DIR_OPTION
@click.option("--listen", default="127.0.0.1:8469", show_default=True, help="host:port for the gateway")
def serve(data_dir: Path, listen: str) -> None:
    """Serve the /v1 gateway over the data directory."""
    import uvicorn

    from .service import Gateway, create_app

    try:
        node, labels = load_node(data_dir)
    except (Rejection, OSError, KeyError) as exc:
        _error(str(exc))
    host, _, port = listen.partition(":")
    gateway = Gateway(node, labels=labels)
    app = create_app(gateway)
    click.echo(f"result: serving height={node.height()} actors={len(labels)} on http://{listen}")
    for address, label in sorted(labels.items(), key=lambda kv: kv[1]):
        role = node.state.active_role(address)
        click.echo(f"  actor {label:12s} {role.value if role else '-':18s} {address}")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8469), log_level="warning")


if __name__ == "__main__":
    main()
