"""Basic-block and edge construction over parsed TEAL."""
from __future__ import annotations

from dataclasses import dataclass, field

from .parser import TealProgram

FALLTHROUGH = "fallthrough"
BRANCH = "branch"
BRANCH_NOT_TAKEN = "branch_not_taken"

_TERMINATORS = {"b", "bz", "bnz", "return", "err"}


@dataclass
class BasicBlock:
    index: int
    start: int  # instruction index, inclusive
    end: int    # instruction index, exclusive

    def instruction_indices(self) -> range:
        return range(self.start, self.end)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str


def build_cfg(program: TealProgram) -> TealProgram:
    """Populate program.blocks and program.edges in place and return it.

    Block boundaries sit at labels and after {b, bz, bnz, return, err}.
    """
    n = len(program.instructions)
    starts = {0} if n else set()
    label_starts = {idx for idx in program.labels.values() if idx < n}
    starts |= label_starts
    for i, ins in enumerate(program.instructions):
        if ins.opcode in _TERMINATORS and i + 1 < n:
            starts.add(i + 1)

    ordered = sorted(starts)
    blocks = [
        BasicBlock(index=bi, start=s, end=(ordered[bi + 1] if bi + 1 < len(ordered) else n))
        for bi, s in enumerate(ordered)
    ]
    start_to_block = {b.start: b.index for b in blocks}

    def block_of_label(name: str) -> int | None:
        idx = program.labels[name]
        return start_to_block.get(idx)  # None for labels past the last instruction

    edges: list[Edge] = []
    for b in blocks:
        last = program.instructions[b.end - 1]
        op = last.opcode
        if op in {"return", "err"}:
            continue
        if op == "b":
            dst = block_of_label(last.immediates[0])
            if dst is not None:
                edges.append(Edge(b.index, dst, BRANCH))
            continue
        if op in {"bz", "bnz"}:
            dst = block_of_label(last.immediates[0])
            if dst is not None:
                edges.append(Edge(b.index, dst, BRANCH))
            if b.index + 1 < len(blocks):
                edges.append(Edge(b.index, b.index + 1, BRANCH_NOT_TAKEN))
            continue
        if b.index + 1 < len(blocks):
            edges.append(Edge(b.index, b.index + 1, FALLTHROUGH))

    program.blocks = blocks
    program.edges = edges
    return program


def successors(program: TealProgram, block_index: int) -> list[Edge]:
    return [e for e in program.edges if e.src == block_index]
