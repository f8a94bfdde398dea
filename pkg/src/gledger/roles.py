"""Stakeholder roles and the role/action permission matrix.

The matrix is total: every (role, action) pair is defined, and lookups never
fall through to a default. It ships as a sorted-key JSON config file whose
hash is pinned in the genesis block.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path

from .canon import canonical_serialize, hash_value


class Role(str, Enum):
    BORROWER = "Borrower"
    BANK = "Bank"
    CGI = "CGI"
    AUDITOR = "Auditor"
    GOVERNMENT_AGENCY = "GovernmentAgency"
    INVESTOR_SHAREHOLDER = "InvestorShareholder"


class Action(str, Enum):
    ISSUE_TX = "IssueTx"
    READ_LEDGER = "ReadLedger"
    VALIDATE = "Validate"
    PROPOSE_RISK_LINE = "ProposeRiskLine"
    DECIDE_GUARANTEE = "DecideGuarantee"
    FILE_CLAIM = "FileClaim"
    ARBITRATE = "Arbitrate"
    AUDIT_READ = "AuditRead"


ROLES = list(Role)
ACTIONS = list(Action)

# Default grants. Auditors and the government agency are read-only with
# respect to case-driving actions; the auditor additionally arbitrates
# disputes (and must be able to submit the ruling transaction), and both
# admission authorities issue registry transactions, so IssueTx stays open
# for them. Investors/shareholders observe only.
_DEFAULT_ALLOW: dict[Role, set[Action]] = {
    Role.BORROWER: {Action.ISSUE_TX, Action.READ_LEDGER, Action.VALIDATE},
    Role.BANK: {
        Action.ISSUE_TX,
        Action.READ_LEDGER,
        Action.VALIDATE,
        Action.PROPOSE_RISK_LINE,
        Action.FILE_CLAIM,
    },
    Role.CGI: {
        Action.ISSUE_TX,
        Action.READ_LEDGER,
        Action.VALIDATE,
        Action.PROPOSE_RISK_LINE,
        Action.DECIDE_GUARANTEE,
        Action.ARBITRATE,
    },
    Role.AUDITOR: {
        Action.ISSUE_TX,
        Action.READ_LEDGER,
        Action.VALIDATE,
        Action.ARBITRATE,
        Action.AUDIT_READ,
    },
    Role.GOVERNMENT_AGENCY: {
        Action.ISSUE_TX,
        Action.READ_LEDGER,
        Action.VALIDATE,
        Action.AUDIT_READ,
    },
    Role.INVESTOR_SHAREHOLDER: {Action.READ_LEDGER, Action.VALIDATE},
}


class PermissionMatrix:
    def __init__(self, table: dict[str, dict[str, bool]], version: int = 1):
        for role in ROLES:
            if role.value not in table:
                raise ValueError(f"matrix missing role {role.value}")
            for action in ACTIONS:
                if action.value not in table[role.value]:
                    raise ValueError(f"matrix missing ({role.value}, {action.value})")
        self.table = table
        self.version = version

    def allows(self, role: Role, action: Action) -> bool:
        return self.table[role.value][action.value]

    def to_config(self) -> dict:
        return {"version": self.version, "grants": self.table}

    @classmethod
    def from_config(cls, config: dict) -> "PermissionMatrix":
        return cls(config["grants"], version=config.get("version", 1))

    @classmethod
    def default(cls) -> "PermissionMatrix":
        table = {
            role.value: {action.value: action in _DEFAULT_ALLOW[role] for action in ACTIONS}
            for role in ROLES
        }
        return cls(table)

    def config_hash(self) -> bytes:
        return hash_value(self.to_config())


def save_matrix(matrix: PermissionMatrix, path: Path) -> None:
    path.write_bytes(canonical_serialize(matrix.to_config()) + b"\n")


def load_matrix(path: Path) -> PermissionMatrix:
    import json

    return PermissionMatrix.from_config(json.loads(path.read_text()))
