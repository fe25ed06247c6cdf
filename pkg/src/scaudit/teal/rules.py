"""Detection rules for the eight evaluated Algorand categories.

The engine enumerates approving paths (entry to an accepting `return`, or to
implicit final approval) with per-path cycle cutting, and checks each path
for dominating guards. Guard recognition is intra-block only: a transaction
field read must flow into a comparison against a safe constant inside the
same basic block, and the comparison result must feed `assert` or a
conditional branch with a directly rejecting side. Programs are expected to
be small and loop-free; where the abstract stack loses track of a value the
engine errs toward reporting (over-approximation of vulnerability).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .cfg import BasicBlock, build_cfg
from .parser import TealProgram, int_value, parse_teal

_COMPARE_OPS = {"==", "!=", "<", "<="}
_GUARDABLE_FIELDS = {
    "RekeyTo", "CloseRemainderTo", "AssetCloseTo", "AssetReceiver", "Receiver", "Fee",
}
_FIELD_CATEGORY = {
    "RekeyTo": "unchecked_rekey_to",
    "CloseRemainderTo": "unchecked_close_remainder_to",
    "AssetCloseTo": "unchecked_asset_close_to",
    "AssetReceiver": "unchecked_asset_receiver",
    "Receiver": "unchecked_payment_receiver",
    "Fee": "unchecked_transaction_fee",
}
_ONCOMPLETION_CATEGORY = {4: "arbitrary_update", 5: "arbitrary_delete"}

_MAX_PATHS = 10_000


@dataclass(frozen=True)
class Finding:
    category: str
    line_span: tuple[int, int]
    message: str
    evidence: tuple[int, ...]  # instruction line numbers

    def record(self) -> str:
        return f"{self.category}|{self.line_span[0]}|{self.line_span[1]}|{self.message}"


# ---------------------------------------------------------------------------
# abstract stack values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Val:
    kind: str  # field/int/addr/byte/global/guard/oc/unknown
    detail: object = None
    line: int = 0


def _unknown() -> _Val:
    return _Val("unknown")


@dataclass
class _Guard:
    """Comparison of a guardable field against a safe constant."""
    fields: frozenset[str]
    ops: dict[str, str]          # field -> comparison op
    rhs: dict[str, str]          # field -> constant kind (zero_addr/addr/int/creator)
    lines: tuple[int, ...] = ()
    oc_value: tuple[int, int] | None = None  # (OnCompletion const, line) for == int compares


@dataclass
class _BlockFacts:
    guards: list[_Guard] = field(default_factory=list)          # guards that feed assert
    branch_guard: _Guard | None = None                           # guard feeding the terminator
    sender_guard_lines: list[int] = field(default_factory=list)
    oc_compare: tuple[int, int] | None = None                    # (oncompletion const, line) feeding terminator
    oc_assert: list[tuple[int, int]] = field(default_factory=list)
    terminal: str = "none"  # approve/reject/open (open = falls through or branches)
    terminal_line: int = 0


def _const_kind(val: _Val) -> str | None:
    if val.kind == "global" and val.detail == "ZeroAddress":
        return "zero_addr"
    if val.kind == "global" and val.detail == "CreatorAddress":
        return "creator"
    if val.kind == "addr":
        return "addr"
    if val.kind == "int":
        return "int"
    return None


def _merge_guards(a: _Guard, b: _Guard) -> _Guard:
    return _Guard(
        fields=a.fields | b.fields,
        ops={**a.ops, **b.ops},
        rhs={**a.rhs, **b.rhs},
        lines=tuple(sorted(set(a.lines) | set(b.lines))),
        oc_value=a.oc_value or b.oc_value,
    )


def _interpret_block(program: TealProgram, block: BasicBlock) -> _BlockFacts:
    facts = _BlockFacts()
    stack: list[_Val] = []

    def pop() -> _Val:
        return stack.pop() if stack else _unknown()

    for idx in block.instruction_indices():
        ins = program.instructions[idx]
        op = ins.opcode
        if op == "int":
            stack.append(_Val("int", int_value(ins.immediates[0]), ins.line))
        elif op == "addr":
            stack.append(_Val("addr", ins.immediates[0], ins.line))
        elif op == "byte":
            stack.append(_Val("byte", ins.immediates[0], ins.line))
        elif op == "global":
            stack.append(_Val("global", ins.immediates[0], ins.line))
        elif op == "txn":
            stack.append(_Val("field", ins.immediates[0], ins.line))
        elif op == "gtxn":
            stack.append(_Val("field", ins.immediates[1], ins.line))
        elif op in _COMPARE_OPS or op in {">", ">="}:
            rhs, lhs = pop(), pop()
            guard = None
            if op in _COMPARE_OPS:
                for fld_val, const_val in ((lhs, rhs), (rhs, lhs)):
                    if fld_val.kind != "field":
                        continue
                    const = _const_kind(const_val)
                    if const is None:
                        continue
                    fname = str(fld_val.detail)
                    if fname in _GUARDABLE_FIELDS or fname in {"Sender", "OnCompletion"}:
                        oc = None
                        if fname == "OnCompletion" and op == "==" and const_val.kind == "int":
                            oc = (int(const_val.detail), ins.line)
                        guard = _Guard(
                            fields=frozenset([fname]),
                            ops={fname: op},
                            rhs={fname: const},
                            lines=(fld_val.line, ins.line),
                            oc_value=oc,
                        )
                        break
            stack.append(_Val("guard", guard, ins.line) if guard else _unknown())
        elif op == "&&":
            rhs, lhs = pop(), pop()
            if lhs.kind == "guard" and rhs.kind == "guard" and lhs.detail and rhs.detail:
                stack.append(_Val("guard", _merge_guards(lhs.detail, rhs.detail), ins.line))
            else:
                stack.append(_unknown())
        elif op in {"||", "!", "+", "-", "*", "/"}:
            pop()
            if op != "!":
                pop()
            stack.append(_unknown())
        elif op == "dup":
            top = stack[-1] if stack else _unknown()
            stack.append(top)
        elif op == "pop":
            pop()
        elif op == "assert":
            top = pop()
            if top.kind == "guard" and top.detail is not None:
                guard: _Guard = top.detail
                facts.guards.append(guard)
                if "Sender" in guard.fields and guard.rhs.get("Sender") in {"creator", "addr"}:
                    facts.sender_guard_lines.extend(guard.lines)
                if guard.oc_value is not None and guard.oc_value[0] in _ONCOMPLETION_CATEGORY:
                    facts.oc_assert.append(guard.oc_value)
        elif op == "app_global_get":
            pop()
            stack.append(_unknown())
        elif op == "app_global_put":
            pop()
            pop()
        elif op in {"bz", "bnz"}:
            top = pop()
            if top.kind == "guard" and top.detail is not None:
                facts.branch_guard = top.detail
                oc = top.detail.oc_value
                if oc is not None and oc[0] in _ONCOMPLETION_CATEGORY:
                    facts.oc_compare = oc
            facts.terminal = "open"
            facts.terminal_line = ins.line
        elif op == "b":
            facts.terminal = "open"
            facts.terminal_line = ins.line
        elif op == "err":
            facts.terminal = "reject"
            facts.terminal_line = ins.line
        elif op == "return":
            top = pop()
            if top.kind == "int":
                facts.terminal = "approve" if top.detail != 0 else "reject"
            else:
                facts.terminal = "approve"  # conservative
            facts.terminal_line = ins.line

    if facts.terminal == "none":
        # Block ends without terminator: either falls through, or the program
        # ends here with implicit approval semantics (nonzero top of stack).
        last_line = program.instructions[block.end - 1].line if block.end > block.start else 0
        if block.end == len(program.instructions):
            top = stack[-1] if stack else _unknown()
            facts.terminal = "reject" if (top.kind == "int" and top.detail == 0) else "approve"
        else:
            facts.terminal = "open"
        facts.terminal_line = last_line
    return facts


# ---------------------------------------------------------------------------
# path-level analysis
# ---------------------------------------------------------------------------

class _ProgramFacts:
    def __init__(self, program: TealProgram):
        if not program.blocks:
            build_cfg(program)
        self.program = program
        self.block_facts = [_interpret_block(program, b) for b in program.blocks]
        self.succ: dict[int, list] = {}
        for e in program.edges:
            self.succ.setdefault(e.src, []).append(e)

    def is_rejecting(self, block_index: int) -> bool:
        return self.block_facts[block_index].terminal == "reject"

    def effective_guards(self, block_index: int) -> list[_Guard]:
        """Assert-fed guards plus a terminator guard with a rejecting side."""
        facts = self.block_facts[block_index]
        guards = list(facts.guards)
        bg = facts.branch_guard
        if bg is not None:
            if any(self.is_rejecting(e.dst) for e in self.succ.get(block_index, ())) or not self.succ.get(block_index):
                guards.append(bg)
        return guards

    def sender_guarded(self, block_index: int) -> bool:
        facts = self.block_facts[block_index]
        if facts.sender_guard_lines:
            return True
        for g in self.effective_guards(block_index):
            if "Sender" in g.fields and g.rhs.get("Sender") in {"creator", "addr"}:
                return True
        return False


def iter_approving_paths(program: TealProgram, *, max_paths: int = _MAX_PATHS):
    """Yield approving paths as lists of block indices (entry block first)."""
    facts = _ProgramFacts(program)
    yield from _iter_paths(facts, max_paths)


def _iter_paths(facts: _ProgramFacts, max_paths: int):
    if not facts.program.blocks:
        return
    emitted = 0
    stack = [(0, [0])]
    while stack:
        node, path = stack.pop()
        bf = facts.block_facts[node]
        succ = facts.succ.get(node, [])
        if bf.terminal == "approve":
            yield path
            emitted += 1
            if emitted >= max_paths:
                return
            continue
        if bf.terminal == "reject":
            continue
        for edge in reversed(succ):
            if edge.dst in path:
                continue  # cycle cut: each block at most once per path
            stack.append((edge.dst, path + [edge.dst]))


def _field_guarded_on_path(facts: _ProgramFacts, path: list[int], fld: str) -> bool:
    for block_index in path:
        for g in facts.effective_guards(block_index):
            if fld not in g.fields:
                continue
            if fld == "Fee":
                if g.ops.get(fld) in {"<", "<="} and g.rhs.get(fld) == "int":
                    return True
                continue
            if g.rhs.get(fld) in {"zero_addr", "addr", "int", "creator"}:
                return True
    return False


def _oc_edges_on_path(facts: _ProgramFacts, path: list[int]):
    """(oncompletion const, line) markers the path actually passes through."""
    markers = []
    for i, block_index in enumerate(path):
        bf = facts.block_facts[block_index]
        markers.extend(bf.oc_assert)
        if bf.oc_compare is None or i + 1 >= len(path):
            continue
        nxt = path[i + 1]
        last = facts.program.instructions[facts.program.blocks[block_index].end - 1]
        for edge in facts.succ.get(block_index, ()):
            if edge.dst != nxt:
                continue
            # For bnz the branch edge is the comparison-true side; for bz the
            # fallthrough (not-taken) edge is.
            taken = edge.kind == "branch"
            if (last.opcode == "bnz" and taken) or (last.opcode == "bz" and not taken):
                markers.append(bf.oc_compare)
    return markers


def analyze(program: TealProgram) -> list[Finding]:
    """Run all eight rules; findings sorted by (line, category)."""
    facts = _ProgramFacts(program)
    paths = list(_iter_paths(facts, _MAX_PATHS))
    findings: dict[str, Finding] = {}

    for path in paths:
        terminal_line = facts.block_facts[path[-1]].terminal_line
        for fld, category in _FIELD_CATEGORY.items():
            if category in findings:
                continue
            if not _field_guarded_on_path(facts, path, fld):
                findings[category] = Finding(
                    category=category,
                    line_span=(terminal_line, terminal_line),
                    message=f"{fld} is not validated on an approving path",
                    evidence=(terminal_line,),
                )
        sender_ok = any(facts.sender_guarded(b) for b in path)
        for oc_value, oc_line in _oc_edges_on_path(facts, path):
            category = _ONCOMPLETION_CATEGORY[oc_value]
            if category in findings or sender_ok:
                continue
            action = "UpdateApplication" if oc_value == 4 else "DeleteApplication"
            span = (min(oc_line, terminal_line), max(oc_line, terminal_line))
            findings[category] = Finding(
                category=category,
                line_span=span,
                message=f"{action} is approved without a Sender check",
                evidence=(oc_line, terminal_line),
            )

    return sorted(findings.values(), key=lambda f: (f.line_span[0], f.category))


def analyze_source(text: str) -> list[Finding]:
    return analyze(build_cfg(parse_teal(text)))
