from __future__ import annotations

import pytest

from scaudit.teal import build_cfg, parse_teal, pretty_print
from scaudit.teal.parser import (
    DUPLICATE_LABEL,
    MALFORMED_IMMEDIATE,
    UNDEFINED_BRANCH_TARGET,
    UNKNOWN_OPCODE,
    TealParseError,
)


def test_minimal_approve_program():
    program = build_cfg(parse_teal("int 1\nreturn"))
    assert len(program.instructions) == 2
    assert len(program.blocks) == 1
    assert program.version == 1


def test_pragma_version_parsed():
    program = parse_teal("#pragma version 6\nint 1\nreturn")
    assert program.version == 6


def test_comments_stripped():
    program = parse_teal("// header comment\nint 1 // inline\nreturn")
    assert [i.opcode for i in program.instructions] == ["int", "return"]


def test_undefined_branch_target():
    with pytest.raises(TealParseError) as err:
        parse_teal("int 1\nbnz lbl\nreturn")
    assert err.value.kind == UNDEFINED_BRANCH_TARGET
    assert err.value.line == 2


def test_unknown_opcode():
    with pytest.raises(TealParseError) as err:
        parse_teal("int 1\ncallsub helper\nreturn")
    assert err.value.kind == UNKNOWN_OPCODE
    assert err.value.line == 2


@pytest.mark.parametrize("line", [
    "int notanumber",
    "txn NotAField",
    "global NotAGlobal",
    "addr SHORT",
    "byte unquoted",
    "gtxn x Fee",
])
def test_malformed_immediates(line):
    with pytest.raises(TealParseError) as err:
        parse_teal(f"{line}\nint 1\nreturn")
    assert err.value.kind == MALFORMED_IMMEDIATE
    assert err.value.line == 1


def test_duplicate_label():
    with pytest.raises(TealParseError) as err:
        parse_teal("lbl:\nint 1\nlbl:\nreturn")
    assert err.value.kind == DUPLICATE_LABEL


def test_named_int_constants():
    program = parse_teal("int UpdateApplication\nint pay\nreturn")
    assert program.instructions[0].immediates == ("UpdateApplication",)


def test_straight_line_single_block_no_edges():
    program = build_cfg(parse_teal("int 1\nint 2\n+\npop\nint 1\nreturn"))
    assert len(program.blocks) == 1
    assert program.edges == []


def test_bnz_two_outgoing_edges():
    program = build_cfg(parse_teal("int 1\nbnz done\nint 0\nreturn\ndone:\nint 1\nreturn"))
    out = [e for e in program.edges if e.src == 0]
    assert len(out) == 2
    assert {e.kind for e in out} == {"branch", "branch_not_taken"}


def test_blocks_partition_instructions():
    src = "int 1\nbnz a\nint 0\nreturn\na:\nint 1\nreturn"
    program = build_cfg(parse_teal(src))
    covered = sorted(i for b in program.blocks for i in b.instruction_indices())
    assert covered == list(range(len(program.instructions)))


def test_pretty_print_fixpoint_simple():
    src = "#pragma version 5\nint 1\nbnz end\nint 0\nreturn\nend:\nint 1\nreturn\n"
    once = parse_teal(src)
    twice = parse_teal(pretty_print(once))
    assert once.instructions == twice.instructions
    assert once.labels == twice.labels
    assert parse_teal(pretty_print(twice)).instructions == twice.instructions


def test_pretty_print_fixpoint_on_corpus(corpus42):
    for sample in corpus42.samples:
        if sample.platform != "algorand":
            continue
        program = parse_teal(sample.renderings["analysis_source"])
        reparsed = parse_teal(pretty_print(program))
        assert reparsed.instructions == program.instructions, sample.id
        assert reparsed.labels == program.labels, sample.id


def test_all_corpus_branch_targets_resolve(corpus42):
    # parse_teal raises on unresolved targets; building the CFG exercises them
    for sample in corpus42.samples:
        if sample.platform != "algorand":
            continue
        program = build_cfg(parse_teal(sample.renderings["analysis_source"]))
        for edge in program.edges:
            assert 0 <= edge.dst < len(program.blocks)
