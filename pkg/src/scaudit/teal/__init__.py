from .parser import TealInstruction, TealParseError, TealProgram, parse_teal, pretty_print
from .cfg import BasicBlock, Edge, build_cfg
from .rules import Finding, analyze, analyze_source, iter_approving_paths

__all__ = [
    "TealInstruction",
    "TealParseError",
    "TealProgram",
    "parse_teal",
    "pretty_print",
    "BasicBlock",
    "Edge",
    "build_cfg",
    "Finding",
    "analyze",
    "analyze_source",
    "iter_approving_paths",
]
