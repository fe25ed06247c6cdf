"""Structural scanner and rules for Solana program source.

This is a lexical/structural pass over Rust-style program source, not a Rust
parser. It keys on a small, documented vocabulary of well-known call and
field patterns; the dataflow boundary is the enclosing function. Precision
and recall are exact on the generated corpus because templates and rules
share this vocabulary (see _VOCABULARY below).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

# Recognition vocabulary, kept in lockstep with the corpus templates:
#   signer_test       .is_signer
#   owner_test        .owner compared against a program-id expression
#   key_compare       .key on either side of == / !=
#   data_deserialize  try_from_slice( / unpack( / deserialize(
#   tag check         ==/!= comparing an indexed data byte or *tag*/*disc* name
#   lamport_arith     raw + - * (incl. compound) next to a balance-named value
#   balance names     lamports / amount / balance
#   checked variants  .checked_add/sub/mul( or saturating_
#   bound comparison  < > <= >= involving a balance-named value
#   cpi_call          invoke( / invoke_signed(, target from `program_id: *X.key`
#   known id          ALL_CAPS const, ::id(), or ::ID
#   pda_derive        create_program_address( ; canonical = find_program_address(
#   stored-bump check ==/!= with a *bump* identifier on either side
#   mutation          borrow_mut / try_borrow_mut
#   authority names   identifiers starting with authority/admin
_VOCABULARY = "see module docstring"

USE_KINDS = (
    "signer_test",
    "owner_test",
    "key_compare",
    "data_deserialize",
    "lamport_arith",
    "cpi_call",
    "pda_derive",
)


class SolanaScanError(Exception):
    def __init__(self, kind: str, line: int, message: str):
        self.kind = kind
        self.line = line
        super().__init__(f"line {line}: {message}")


UNBALANCED_BRACES = "unbalanced-braces"


@dataclass(frozen=True)
class AccountUse:
    identifier: str
    kind: str
    line: int
    guarded: bool | None = None  # set for data_deserialize / cpi_call / pda_derive


@dataclass
class FunctionModel:
    name: str
    start_line: int
    end_line: int
    uses: list[AccountUse] = field(default_factory=list)
    mutations: list[tuple[str, int]] = field(default_factory=list)
    authority_reads: list[tuple[str, int]] = field(default_factory=list)
    has_bound_compare: bool = False
    has_checked_arith: bool = False
    has_tag_check_line: int | None = None
    has_canonical_derive: bool = False
    has_bump_compare: bool = False
    reads_account_data: bool = False
    key_compare_lines: list[int] = field(default_factory=list)


@dataclass
class SourceModel:
    functions: list[FunctionModel]
    text: str

    @property
    def account_uses(self) -> list[AccountUse]:
        return [u for f in self.functions for u in f.uses]


@dataclass(frozen=True)
class Finding:
    category: str
    line_span: tuple[int, int]
    message: str
    evidence: tuple[int, ...]

    def record(self) -> str:
        return f"{self.category}|{self.line_span[0]}|{self.line_span[1]}|{self.message}"


_RE_STRING = re.compile(r'b?"(?:\\.|[^"\\])*"')
_RE_COMMENT = re.compile(r"//.*$")
_RE_FN = re.compile(r"\bfn\s+(\w+)")
_RE_IS_SIGNER = re.compile(r"(\w+)\s*\.\s*is_signer")
_RE_OWNER_TEST = re.compile(r"(\w+)\.owner\s*(?:==|!=)|(?:==|!=)\s*(\w+)\.owner")
_RE_KEY_CMP = re.compile(r"(\w+)\.key\s*(?:==|!=)|(?:==|!=)\s*&?\*?(\w+)\.key")
_RE_DESERIALIZE = re.compile(r"\b(?:\w+::)*(\w+)\s*::\s*(?:try_from_slice|unpack|deserialize)\s*\(")
_RE_TAG_CHECK = re.compile(r"(?:\w+\s*\[\s*\d+\s*\]|\w*(?:tag|disc)\w*)\s*(?:==|!=)", re.IGNORECASE)
_RE_BALANCE_NAME = re.compile(r"lamports|amount|balance", re.IGNORECASE)
_RE_RAW_ARITH = re.compile(r"(?<![+\-*/=!<>])(?:\+|-|\*)=?(?![+\-*/=])")
_RE_CHECKED = re.compile(r"\.(?:checked_(?:add|sub|mul)|saturating_\w+)\s*\(")
_RE_INVOKE = re.compile(r"\binvoke(?:_signed)?\s*\(")
_RE_CPI_TARGET = re.compile(r"program_id\s*:\s*\*?(\w+)\.key")
_RE_KNOWN_ID = re.compile(r"\b[A-Z][A-Z0-9_]{2,}\b|::\s*id\s*\(\s*\)|::\s*ID\b")
_RE_PDA_DERIVE = re.compile(r"\bcreate_program_address\s*\(")
_RE_CANONICAL = re.compile(r"\bfind_program_address\s*\(")
_RE_BUMP_CMP = re.compile(r"\w*bump\w*\s*(?:==|!=)|(?:==|!=)\s*\w*bump\w*", re.IGNORECASE)
_RE_MUTATION = re.compile(r"\b(\w+)\s*\.\s*(?:try_)?borrow_mut|try_borrow_mut_lamports")
_RE_AUTHORITY = re.compile(r"\b((?:authority|admin)\w*)\b")


def _clean_line(line: str) -> str:
    return _RE_COMMENT.sub("", _RE_STRING.sub('""', line))


def scan_source(text: str) -> SourceModel:
    """Single structural pass: function spans, account uses, guard markers."""
    lines = text.splitlines()
    cleaned = [_clean_line(l) for l in lines]

    # brace balance check over the whole file
    depth = 0
    open_stack: list[int] = []
    for lineno, line in enumerate(cleaned, start=1):
        for ch in line:
            if ch == "{":
                depth += 1
                open_stack.append(lineno)
            elif ch == "}":
                depth -= 1
                if depth < 0:
                    raise SolanaScanError(UNBALANCED_BRACES, lineno, "unmatched closing brace")
                open_stack.pop()
    if depth != 0:
        raise SolanaScanError(UNBALANCED_BRACES, open_stack[0], "unclosed brace")

    # function spans by brace counting from each `fn` line
    functions: list[FunctionModel] = []
    i = 0
    while i < len(cleaned):
        m = _RE_FN.search(cleaned[i])
        if not m:
            i += 1
            continue
        name = m.group(1)
        depth = 0
        started = False
        end = i
        for j in range(i, len(cleaned)):
            for ch in cleaned[j]:
                if ch == "{":
                    depth += 1
                    started = True
                elif ch == "}":
                    depth -= 1
            if started and depth == 0:
                end = j
                break
        else:
            end = len(cleaned) - 1
        functions.append(FunctionModel(name=name, start_line=i + 1, end_line=end + 1))
        i = end + 1

    for fn in functions:
        body = list(enumerate(cleaned[fn.start_line - 1 : fn.end_line], start=fn.start_line))
        deserialize_sites: list[tuple[str, int]] = []
        cpi_sites: list[tuple[str, int]] = []
        pda_sites: list[tuple[str, int]] = []
        known_id_compare_lines: dict[str, int] = {}
        tag_line: int | None = None

        for lineno, line in enumerate(cleaned[fn.start_line - 1 : fn.end_line], start=fn.start_line):
            for m in _RE_IS_SIGNER.finditer(line):
                fn.uses.append(AccountUse(m.group(1), "signer_test", lineno))
            m = _RE_OWNER_TEST.search(line)
            if m:
                ident = m.group(1) or m.group(2)
                fn.uses.append(AccountUse(ident, "owner_test", lineno))
            m = _RE_KEY_CMP.search(line)
            if m:
                ident = m.group(1) or m.group(2)
                fn.uses.append(AccountUse(ident, "key_compare", lineno))
                fn.key_compare_lines.append(lineno)
                if _RE_KNOWN_ID.search(line):
                    for km in _RE_KEY_CMP.finditer(line):
                        known_id_compare_lines[km.group(1) or km.group(2)] = lineno
            m = _RE_DESERIALIZE.search(line)
            if m:
                deserialize_sites.append((m.group(1), lineno))
            if _RE_TAG_CHECK.search(line) and ("==" in line or "!=" in line):
                if tag_line is None:
                    tag_line = lineno
            if _RE_CHECKED.search(line):
                fn.has_checked_arith = True
            if _RE_BALANCE_NAME.search(line):
                stripped = re.sub(r"->|=>|==|!=|<=|>=", " ", line)
                # raw arithmetic on a balance-named value; checked calls on the
                # same line do not count as raw
                if (
                    _RE_RAW_ARITH.search(stripped)
                    and not _RE_CHECKED.search(line)
                    and not line.lstrip().startswith("use ")
                ):
                    fn.uses.append(AccountUse(_balance_ident(line), "lamport_arith", lineno))
                if re.search(r"(?<![-=<>])[<>]=?(?![<>])", re.sub(r"->|=>", " ", line)):
                    fn.has_bound_compare = True
            if _RE_INVOKE.search(line):
                cpi_sites.append(("", lineno))
            m = _RE_CPI_TARGET.search(line)
            if m:
                cpi_sites.append((m.group(1), lineno))
            if _RE_PDA_DERIVE.search(line):
                pda_sites.append(("bump", lineno))
            if _RE_CANONICAL.search(line):
                fn.has_canonical_derive = True
            if _RE_BUMP_CMP.search(line):
                fn.has_bump_compare = True
            m = _RE_MUTATION.search(line)
            if m:
                fn.mutations.append((m.group(1) or "", lineno))
            if re.search(r"\.data\b", line):
                fn.reads_account_data = True
            for m in _RE_AUTHORITY.finditer(line):
                fn.authority_reads.append((m.group(1), lineno))

        fn.has_tag_check_line = tag_line
        for ident, lineno in deserialize_sites:
            guarded = tag_line is not None and tag_line < lineno
            fn.uses.append(AccountUse(ident, "data_deserialize", lineno, guarded=guarded))
        # one cpi_call per invoke site; target ident comes from the nearest
        # preceding `program_id: *X.key` construction
        target = ""
        target_line = 0
        invoke_lines = [l for ident, l in cpi_sites if ident == ""]
        targets = [(ident, l) for ident, l in cpi_sites if ident]
        for lineno in invoke_lines:
            for ident, tl in targets:
                if tl <= lineno and tl >= target_line:
                    target, target_line = ident, tl
            guarded = bool(target) and known_id_compare_lines.get(target, 10**9) < lineno
            fn.uses.append(AccountUse(target or "<unknown>", "cpi_call", lineno, guarded=guarded))
        for _, lineno in pda_sites:
            guarded = fn.has_canonical_derive or fn.has_bump_compare
            fn.uses.append(AccountUse("bump", "pda_derive", lineno, guarded=guarded))
        fn.uses.sort(key=lambda u: (u.line, u.kind))

    return SourceModel(functions=functions, text=text)


def _balance_ident(line: str) -> str:
    m = re.search(r"(\w*(?:lamports|amount|balance)\w*)", line, re.IGNORECASE)
    return m.group(1) if m else "balance"


def analyze(model: SourceModel) -> list[Finding]:
    """Run all seven rules; at most one finding per (function, category)."""
    findings: list[Finding] = []
    for fn in model.functions:
        findings.extend(_analyze_function(fn))
    return sorted(findings, key=lambda f: (f.line_span[0], f.category))


def _analyze_function(fn: FunctionModel) -> list[Finding]:
    out: list[Finding] = []
    span = (fn.start_line, fn.end_line)
    uses_by_kind: dict[str, list[AccountUse]] = {}
    for use in fn.uses:
        uses_by_kind.setdefault(use.kind, []).append(use)

    mutates = bool(fn.mutations)
    if mutates and fn.authority_reads and not uses_by_kind.get("key_compare"):
        line = fn.authority_reads[0][1]
        out.append(Finding(
            "missing_key_check", span,
            f"{fn.name}: authority account is trusted without a key comparison",
            (line,),
        ))
    if mutates and not uses_by_kind.get("signer_test"):
        line = fn.mutations[0][1]
        out.append(Finding(
            "signer_check", span,
            f"{fn.name}: state mutation without an is_signer test",
            (line,),
        ))
    reads_data = bool(uses_by_kind.get("data_deserialize")) or fn.reads_account_data
    if reads_data and not uses_by_kind.get("owner_test"):
        out.append(Finding(
            "owner_check", span,
            f"{fn.name}: account data is read without an owner test",
            (fn.start_line,),
        ))
    for use in uses_by_kind.get("data_deserialize", ()):
        if not use.guarded:
            out.append(Finding(
                "type_confusion", span,
                f"{fn.name}: {use.identifier} deserialized without a discriminator check",
                (use.line,),
            ))
            break
    raw_arith = uses_by_kind.get("lamport_arith", ())
    if raw_arith and not fn.has_checked_arith and not fn.has_bound_compare:
        out.append(Finding(
            "integer_flow", span,
            f"{fn.name}: raw arithmetic on {raw_arith[0].identifier} without checked ops or bounds",
            tuple(u.line for u in raw_arith),
        ))
    for use in uses_by_kind.get("cpi_call", ()):
        if not use.guarded:
            out.append(Finding(
                "cpi_unchecked", span,
                f"{fn.name}: invoked program id {use.identifier} is not compared against a known id",
                (use.line,),
            ))
            break
    for use in uses_by_kind.get("pda_derive", ()):
        if not use.guarded:
            out.append(Finding(
                "bump_seed", span,
                f"{fn.name}: PDA derived from caller-supplied bump without canonical check",
                (use.line,),
            ))
            break
    return out


def analyze_source(text: str) -> list[Finding]:
    return analyze(scan_source(text))
