"""Parser for a deliberately small TEAL subset.

The supported opcode set covers approval-program patterns around transaction
field validation and OnCompletion dispatch. Anything outside the subset is a
parse error rather than a silent skip, so the analyzer never claims to have
understood a program it has not.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class TealParseError(Exception):
    """Parse failure with a machine-readable kind and a 1-based line number."""

    def __init__(self, kind: str, line: int, message: str):
        self.kind = kind
        self.line = line
        super().__init__(f"line {line}: {message}")


# kind constants
UNKNOWN_OPCODE = "unknown-opcode"
MALFORMED_IMMEDIATE = "malformed-immediate"
DUPLICATE_LABEL = "duplicate-label"
UNDEFINED_BRANCH_TARGET = "undefined-branch-target"

# Named integer constants accepted by `int`, as in official teal assembly.
INT_CONSTANTS = {
    "NoOp": 0,
    "OptIn": 1,
    "CloseOut": 2,
    "ClearState": 3,
    "UpdateApplication": 4,
    "DeleteApplication": 5,
    "pay": 1,
    "keyreg": 2,
    "acfg": 3,
    "axfer": 4,
    "afrz": 5,
    "appl": 6,
}

TXN_FIELDS = {
    "Sender", "Fee", "Receiver", "Amount", "CloseRemainderTo", "RekeyTo",
    "AssetCloseTo", "AssetReceiver", "AssetAmount", "XferAsset",
    "OnCompletion", "TypeEnum", "ApplicationID", "NumAppArgs", "GroupIndex",
    "FirstValid", "LastValid",
}

GLOBAL_FIELDS = {
    "ZeroAddress", "CreatorAddress", "MinTxnFee", "GroupSize",
    "LatestTimestamp", "CurrentApplicationID", "MinBalance", "Round",
}

# ops with no immediates
_PLAIN_OPS = {
    "==", "!=", "<", "<=", ">", ">=", "&&", "||", "!",
    "+", "-", "*", "/",
    "dup", "pop", "assert", "err", "return",
    "app_global_put", "app_global_get",
}
_BRANCH_OPS = {"b", "bz", "bnz"}

_ADDR_ALPHABET = set("ABCDEFGHIJKLMNOPQRSTUVWXYZ234567")


@dataclass(frozen=True)
class TealInstruction:
    opcode: str
    immediates: tuple[str, ...]
    line: int

    def text(self) -> str:
        return " ".join((self.opcode, *self.immediates))


@dataclass
class TealProgram:
    version: int
    instructions: list[TealInstruction]
    labels: dict[str, int]  # label name -> instruction index
    source: str = ""
    blocks: list = field(default_factory=list)  # populated by build_cfg
    edges: list = field(default_factory=list)

    def label_names_at(self, index: int) -> list[str]:
        return sorted(name for name, i in self.labels.items() if i == index)


def _int_immediate_ok(token: str) -> bool:
    return token.isdigit() or token in INT_CONSTANTS


def int_value(token: str) -> int:
    if token.isdigit():
        return int(token)
    if token in INT_CONSTANTS:
        return INT_CONSTANTS[token]
    raise ValueError(f"not an integer immediate: {token!r}")


def _strip_comment(line: str) -> str:
    # No string literals in TEAL contain `//` in this subset; a plain find
    # is enough (byte immediates are quoted but never carry slashes here).
    pos = line.find("//")
    return line if pos < 0 else line[:pos]


def parse_teal(text: str) -> TealProgram:
    """Parse source text into a TealProgram (CFG not yet built)."""
    version = 1
    version_seen = False
    instructions: list[TealInstruction] = []
    labels: dict[str, int] = {}
    pending_targets: list[tuple[str, int]] = []  # (label, line) to resolve late

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("#pragma"):
            parts = line.split()
            if len(parts) != 3 or parts[1] != "version" or not parts[2].isdigit():
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad pragma: {raw.strip()!r}")
            if not instructions and not version_seen:
                version = int(parts[2])
                version_seen = True
                continue
            raise TealParseError(MALFORMED_IMMEDIATE, lineno, "pragma must precede instructions")
        if line.endswith(":") and " " not in line:
            name = line[:-1]
            if not name or not all(c.isalnum() or c == "_" for c in name):
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad label name {name!r}")
            if name in labels:
                raise TealParseError(DUPLICATE_LABEL, lineno, f"duplicate label {name!r}")
            labels[name] = len(instructions)
            continue

        tokens = line.split()
        op, imms = tokens[0], tokens[1:]
        if op in _PLAIN_OPS:
            if imms:
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"{op} takes no immediates")
        elif op == "int":
            if len(imms) != 1 or not _int_immediate_ok(imms[0]):
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad int immediate: {imms}")
        elif op == "byte":
            if len(imms) != 1 or not (
                (imms[0].startswith('"') and imms[0].endswith('"') and len(imms[0]) >= 2)
                or imms[0].startswith("0x")
            ):
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad byte immediate: {imms}")
        elif op == "addr":
            if len(imms) != 1 or len(imms[0]) != 58 or not set(imms[0]) <= _ADDR_ALPHABET:
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad address immediate: {imms}")
        elif op == "txn":
            if len(imms) != 1 or imms[0] not in TXN_FIELDS:
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad txn field: {imms}")
        elif op == "gtxn":
            if len(imms) != 2 or not imms[0].isdigit() or imms[1] not in TXN_FIELDS:
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad gtxn immediates: {imms}")
        elif op == "global":
            if len(imms) != 1 or imms[0] not in GLOBAL_FIELDS:
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"bad global field: {imms}")
        elif op in _BRANCH_OPS:
            if len(imms) != 1:
                raise TealParseError(MALFORMED_IMMEDIATE, lineno, f"{op} needs a label")
            pending_targets.append((imms[0], lineno))
        else:
            raise TealParseError(UNKNOWN_OPCODE, lineno, f"unsupported opcode {op!r}")
        instructions.append(TealInstruction(op, tuple(imms), lineno))

    for target, lineno in pending_targets:
        if target not in labels:
            raise TealParseError(UNDEFINED_BRANCH_TARGET, lineno, f"branch to undefined label {target!r}")

    return TealProgram(version=version, instructions=instructions, labels=labels, source=text)


def pretty_print(program: TealProgram) -> str:
    """Canonical text form; parse(pretty_print(parse(x))) is a fixpoint."""
    by_index: dict[int, list[str]] = {}
    for name, idx in program.labels.items():
        by_index.setdefault(idx, []).append(name)
    lines = [f"#pragma version {program.version}"]
    for i, ins in enumerate(program.instructions):
        for name in sorted(by_index.get(i, ())):
            lines.append(f"{name}:")
        lines.append(ins.text())
    # labels pointing past the last instruction (empty tail blocks)
    for name in sorted(by_index.get(len(program.instructions), ())):
        lines.append(f"{name}:")
    return "\n".join(lines) + "\n"
