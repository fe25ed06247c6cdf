"""OWASP Top 10 (2025) smart-contract taxonomy for Algorand and Solana.

The category table lives in ``data/taxonomy_v1.txt`` (one pipe-delimited
record per category) so that alias curation does not require code changes.
Everything here is immutable after load and safe to share across workers.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources


class TaxonomyError(Exception):
    """Unknown category key or a malformed/inconsistent fixture."""


class Platform(str, Enum):
    ALGORAND = "algorand"
    SOLANA = "solana"

    @classmethod
    def coerce(cls, value: "Platform | str") -> "Platform":
        if isinstance(value, Platform):
            return value
        try:
            return cls(value)
        except ValueError:
            raise TaxonomyError(f"unknown platform: {value!r}") from None


OWASP_TOP_10: dict[str, str] = {
    "V1": "Access Control Vulnerabilities",
    "V2": "Price Oracle Manipulation",
    "V3": "Logic Errors",
    "V4": "Lack of Input Validation",
    "V5": "Reentrancy Attacks",
    "V6": "Unchecked External Calls",
    "V7": "Flash Loan Attacks",
    "V8": "Integer Overflow and Underflow",
    "V9": "Insecure Randomness",
    "V10": "Denial of Service (DoS) Attacks",
}


@dataclass(frozen=True)
class OwaspEntry:
    id: str
    name: str


@dataclass(frozen=True)
class VulnCategory:
    key: str
    platform: Platform
    owasp_id: str
    display_name: str
    aliases: tuple[str, ...]
    in_eval_scope: bool
    description: str = ""

    @property
    def match_terms(self) -> tuple[str, ...]:
        """Display name plus aliases, lowercased and deduplicated."""
        seen: dict[str, None] = {}
        for term in (self.display_name.lower(), *self.aliases):
            seen.setdefault(term, None)
        return tuple(seen)


# One-sentence descriptions, keyed by category. Kept out of the fixture so
# the fixture schema stays flat.
_DESCRIPTIONS = {
    "arbitrary_delete": "Application can be deleted without verifying the caller's identity.",
    "arbitrary_update": "Application code can be replaced without verifying the caller's identity.",
    "unchecked_asset_receiver": "Asset transfer receiver is not validated, allowing asset redirection.",
    "unchecked_payment_receiver": "Payment receiver is not validated, allowing fund redirection.",
    "unchecked_asset_close_to": "AssetCloseTo field is unconstrained, letting a transaction drain asset holdings.",
    "unchecked_close_remainder_to": "CloseRemainderTo field is unconstrained, letting a transaction drain the balance.",
    "unchecked_rekey_to": "RekeyTo field is unconstrained, allowing signing authority takeover.",
    "unchecked_transaction_fee": "Transaction fee is unbounded, enabling fee-drain and resource exhaustion.",
    "missing_key_check": "State-mutating handler trusts an authority account without comparing its public key.",
    "owner_check": "Account data is consumed without verifying the owning program.",
    "signer_check": "State mutation is allowed without requiring a transaction signer.",
    "type_confusion": "Account data is deserialized without checking its type discriminator.",
    "cpi_unchecked": "Cross-program invocation target is taken from input without validating the program id.",
    "bump_seed": "PDA is derived from a caller-supplied bump without canonical derivation or a stored-bump check.",
    "integer_flow": "Balance arithmetic uses raw operators without overflow or bound checks.",
}

_FIXTURE_HEADER = "#taxonomy-v1"
_WORD_CHARS = re.compile(r"[a-z0-9_]")


def _owasp_order(owasp_id: str) -> int:
    return int(owasp_id[1:])


def _load_fixture_text() -> str:
    return resources.files("scaudit").joinpath("data/taxonomy_v1.txt").read_text("utf-8")


def _parse_fixture(text: str) -> list[VulnCategory]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _FIXTURE_HEADER:
        raise TaxonomyError(f"taxonomy fixture must start with {_FIXTURE_HEADER}")
    categories = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 6:
            raise TaxonomyError(f"taxonomy fixture line {lineno}: expected 6 fields, got {len(parts)}")
        key, platform, owasp_id, display_name, aliases, in_scope = parts
        if owasp_id not in OWASP_TOP_10:
            raise TaxonomyError(f"taxonomy fixture line {lineno}: unknown OWASP id {owasp_id!r}")
        categories.append(
            VulnCategory(
                key=key,
                platform=Platform(platform),
                owasp_id=owasp_id,
                display_name=display_name,
                aliases=tuple(a.strip().lower() for a in aliases.split(",") if a.strip()),
                in_eval_scope=in_scope == "1",
                description=_DESCRIPTIONS.get(key, ""),
            )
        )
    return categories


def _is_word_prefix(shorter: str, longer: str) -> bool:
    """True when ``shorter`` is a whole-word prefix of ``longer``.

    Such a pair is ambiguous for earliest-position matching: any text that
    matches the longer term also matches the shorter one at the same offset.
    """
    if not longer.startswith(shorter) or shorter == longer:
        return False
    return not _WORD_CHARS.match(longer[len(shorter)])


def _validate(categories: list[VulnCategory]) -> None:
    keys = [c.key for c in categories]
    if len(keys) != len(set(keys)):
        raise TaxonomyError("duplicate category keys in fixture")
    eval_counts = {p: 0 for p in Platform}
    for cat in categories:
        if cat.in_eval_scope:
            eval_counts[cat.platform] += 1
            if len(cat.aliases) < 2:
                raise TaxonomyError(f"{cat.key}: evaluated categories need at least 2 aliases")
    if eval_counts[Platform.ALGORAND] != 8 or eval_counts[Platform.SOLANA] != 5:
        raise TaxonomyError(f"expected 8 Algorand / 5 Solana evaluated categories, got {eval_counts}")
    # Alias ambiguity: within one platform, no term of one category may equal
    # or be a whole-word prefix of a term of a different category.
    for platform in Platform:
        cats = [c for c in categories if c.platform == platform]
        for a_cat in cats:
            for b_cat in cats:
                if a_cat.key == b_cat.key:
                    continue
                for a in a_cat.match_terms:
                    for b in b_cat.match_terms:
                        if a == b or _is_word_prefix(a, b):
                            raise TaxonomyError(
                                f"ambiguous aliases: {a!r} ({a_cat.key}) vs {b!r} ({b_cat.key})"
                            )


@lru_cache(maxsize=1)
def _registry() -> tuple[VulnCategory, ...]:
    categories = _parse_fixture(_load_fixture_text())
    categories.sort(key=lambda c: (c.platform.value, _owasp_order(c.owasp_id), c.key))
    _validate(categories)
    return tuple(categories)


def owasp_entries() -> list[OwaspEntry]:
    return [OwaspEntry(id=k, name=v) for k, v in OWASP_TOP_10.items()]


def all_categories(platform: Platform | str | None = None, *, include_mapped_only: bool = True) -> list[VulnCategory]:
    """Categories in deterministic (platform, OWASP id, key) order.

    With ``include_mapped_only=False`` only the 13 evaluated categories are
    returned; the default also carries the two Solana access checks that are
    mapped but never evaluated (owner_check, signer_check).
    """
    cats = _registry()
    if platform is not None:
        p = Platform.coerce(platform)
        cats = tuple(c for c in cats if c.platform == p)
    if not include_mapped_only:
        cats = tuple(c for c in cats if c.in_eval_scope)
    return list(cats)


def eval_categories(platform: Platform | str | None = None) -> list[VulnCategory]:
    return [c for c in all_categories(platform) if c.in_eval_scope]


def get_category(key: str) -> VulnCategory:
    for cat in _registry():
        if cat.key == key:
            return cat
    raise TaxonomyError(f"unknown category key: {key!r}")


def owasp_for(category_key: str) -> str:
    return get_category(category_key).owasp_id


@lru_cache(maxsize=4)
def _matchers(platform: Platform) -> tuple[tuple[int, str, re.Pattern[str]], ...]:
    out = []
    for order, cat in enumerate(all_categories(platform)):
        for term in cat.match_terms:
            pattern = re.compile(r"(?<![\w])" + re.escape(term) + r"(?![\w])", re.IGNORECASE)
            out.append((order, cat.key, pattern))
    return tuple(out)


def parse_category_label(text: str, platform: Platform | str) -> VulnCategory | None:
    """Map free-form text to a category by whole-word alias matching.

    The earliest match position in the text wins; ties at the same position
    fall back to the deterministic category order. Returns None when no
    alias or display name occurs.
    """
    p = Platform.coerce(platform)
    best: tuple[int, int] | None = None  # (position, category order)
    best_key: str | None = None
    for order, key, pattern in _matchers(p):
        m = pattern.search(text)
        if m is None:
            continue
        rank = (m.start(), order)
        if best is None or rank < best:
            best = rank
            best_key = key
    return get_category(best_key) if best_key is not None else None


# Platform coverage of the ten OWASP entries, for reports. Status values:
# "mapped" (detectable categories exist), "out_of_scope" (manifesting at the
# oracle/protocol/dependency level, not in contract code analyzed here), and
# "not_applicable" (prevented by platform architecture).
COVERAGE: tuple[tuple[str, str, str, tuple[str, ...], str], ...] = (
    ("V1", "algorand", "mapped",
     ("arbitrary_update", "arbitrary_delete", "unchecked_payment_receiver", "unchecked_asset_receiver"),
     "State-changing calls and transfer targets need explicit caller/receiver validation."),
    ("V2", "algorand", "out_of_scope", (), "Arises from off-chain oracle integration, not contract code."),
    ("V3", "algorand", "out_of_scope", (), "Generic logic flaws are not tied to specific instructions."),
    ("V4", "algorand", "not_applicable", (), ""),
    ("V5", "algorand", "not_applicable", (), "Atomic, stateless transaction model prevents reentrancy."),
    ("V6", "algorand", "mapped",
     ("unchecked_rekey_to", "unchecked_close_remainder_to", "unchecked_asset_close_to"),
     "Dangerous transaction-effect fields must be pinned to safe values."),
    ("V7", "algorand", "not_applicable", (), "Atomic groups, no nonces, no failed-transaction penalties."),
    ("V8", "algorand", "mapped", ("unchecked_transaction_fee",),
     "Arithmetic overflow/underflow belongs here too but is not an evaluated category."),
    ("V9", "algorand", "not_applicable", (), "VRF-based randomness is available at the protocol level."),
    ("V10", "algorand", "out_of_scope", (),
     "Application-level DoS surfaces through fee abuse; protocol level is out of scope."),
    ("V1", "solana", "mapped", ("missing_key_check", "owner_check", "signer_check"),
     "Owner, signer, and key checks gate program state and accounts."),
    ("V2", "solana", "out_of_scope", (), "Oracle manipulation depends on external data feeds."),
    ("V3", "solana", "out_of_scope", (), "Generic logic flaws are not tied to specific instructions."),
    ("V4", "solana", "mapped", ("type_confusion",), "Account inputs need type/discriminator validation."),
    ("V5", "solana", "mapped", ("cpi_unchecked",), "Cross-program invocation needs strict target validation."),
    ("V6", "solana", "mapped", ("bump_seed",), "Unchecked low-level calls tied to bump seed handling."),
    ("V7", "solana", "out_of_scope", (), "Flash loans depend on external protocols."),
    ("V8", "solana", "mapped", ("integer_flow",), "Integer overflow/underflow without validation."),
    ("V9", "solana", "mapped", ("bump_seed",), "PDA collisions from predictable bump seeds; same detector."),
    ("V10", "solana", "out_of_scope", (), "Leader-election DoS is a network-level concern."),
)


def coverage_rows(platform: Platform | str | None = None):
    rows = COVERAGE
    if platform is not None:
        p = Platform.coerce(platform)
        rows = tuple(r for r in rows if r[1] == p.value)
    return list(rows)
