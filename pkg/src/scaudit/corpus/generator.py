"""Deterministic corpus generation, rendering, and ground-truth validation.

The corpus is a pure function of (seed, per_class): per-sample parameters
come from a RNG keyed on seed, category, and ordinal, so twins share
parameters and re-runs are byte-identical. Static analyzers double as the
ground-truth check: every vulnerable twin must trigger exactly its own
category rule and every safe twin none.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .. import solana as solana_analyzer
from ..taxonomy import Platform, eval_categories
from ..teal import analyze_source as analyze_teal
from . import algorand_templates, solana_templates
from .manifest import ANALYSIS_SOURCE, SAFE, VULNERABLE, CorpusManifest, Sample

FLAVOR_COUNT = 5

_ADDR_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567"

_GLOBAL_KEYS = ("counter", "total", "tally", "config", "epoch")
_ACTIONS = {
    "missing_key_check": ("withdraw", "payout", "drain", "sweep", "release"),
    "integer_flow": ("deposit", "credit", "top_up", "fund", "accrue"),
    "type_confusion": ("update_limit", "set_limit", "raise_cap", "tune_cap", "adjust_limit"),
    "cpi_unchecked": ("forward_payment", "relay_transfer", "proxy_send", "route_payment", "bridge_send"),
    "bump_seed": ("register_vault", "init_vault", "claim_slot", "bind_vault", "open_cell"),
}
_VAULTS = ("vault", "treasury", "pool_account", "escrow_acct", "reserve")
_PAYERS = ("payer", "depositor", "funder", "contributor", "sponsor")
_RECIPIENTS = ("recipient", "beneficiary", "payee", "collector", "drawee")
_AUTHORITIES = ("authority", "admin_account", "authority_info", "admin_acc", "authority_acct")
_STRUCTS = ("VaultState", "PoolState", "EscrowState", "TreasuryState", "ReserveState")
_TAG_CONSTS = ("VAULT_TAG", "STATE_TAG", "ACCOUNT_TAG", "CONFIG_TAG", "DATA_TAG")
_SEEDS = ("vault", "escrow", "pool", "treasury", "cell")
_KNOWN_IDS = ("TOKEN_PROGRAM_ID", "TRANSFER_PROGRAM_ID", "LEDGER_PROGRAM_ID", "ROUTER_PROGRAM_ID", "SWAP_PROGRAM_ID")
_SOURCES = ("source", "src_account", "from_account", "debit_acct", "origin")
_DESTS = ("destination", "dst_account", "to_account", "credit_acct", "sink")
_WALLETS = ("wallet", "user_wallet", "holder", "spender", "initiator")
_TARGETS = ("token_program", "target_program", "callee_program", "external_program", "invoked_program")
_CONFIGS = ("config", "settings_account", "state_account", "params_account", "profile")
_ADMINS = ("admin", "admin_key_holder", "administrator", "admin_signer", "admin_wallet")
_PDAS = ("vault_pda", "cell_pda", "slot_pda", "derived_account", "pda_account")


class TemplateError(Exception):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(message)


def _rand_addr(rng: random.Random) -> str:
    return "".join(rng.choice(_ADDR_ALPHABET) for _ in range(58))


def _params_for(platform: Platform, category: str, seed: int, ordinal: int) -> dict:
    rng = random.Random(f"{seed}:{category}:{ordinal}")
    flavor = ordinal % FLAVOR_COUNT
    if platform is Platform.ALGORAND:
        params: dict = {
            "flavor": flavor,
            "teal_version": rng.choice((4, 5, 6)),
            "fee_max": rng.choice((1000, 2000, 3000, 5000)),
        }
        if category in ("arbitrary_update", "arbitrary_delete"):
            params["global_key"] = _GLOBAL_KEYS[flavor]
            params["step"] = rng.randint(1, 9)
        else:
            params["amount"] = rng.randrange(10_000, 5_000_000, 1000)
            if category in ("unchecked_asset_close_to", "unchecked_asset_receiver"):
                params["asset_receiver"] = _rand_addr(rng)
            else:
                params["receiver"] = _rand_addr(rng)
        return params
    params = {"flavor": flavor, "action": _ACTIONS[category][flavor]}
    if category == "missing_key_check":
        params.update(
            vault=_VAULTS[flavor],
            authority=_AUTHORITIES[flavor],
            recipient=_RECIPIENTS[flavor],
            struct=_STRUCTS[flavor],
            tag_const=_TAG_CONSTS[flavor],
            tag=rng.randint(1, 9),
        )
    elif category == "integer_flow":
        params.update(vault=_VAULTS[flavor], payer=_PAYERS[flavor])
    elif category == "type_confusion":
        params.update(
            config=_CONFIGS[flavor],
            admin=_ADMINS[flavor],
            struct=_STRUCTS[flavor],
            tag_const=_TAG_CONSTS[flavor],
            tag=rng.randint(1, 9),
        )
    elif category == "cpi_unchecked":
        params.update(
            source=_SOURCES[flavor],
            dest=_DESTS[flavor],
            wallet=_WALLETS[flavor],
            target_prog=_TARGETS[flavor],
            known_id=_KNOWN_IDS[flavor],
            id_byte=rng.randint(2, 250),
        )
    elif category == "bump_seed":
        params.update(payer=_PAYERS[flavor], pda=_PDAS[flavor], seed=_SEEDS[flavor])
    return params


def _builder_for(platform: str, category: str):
    mod = algorand_templates if platform == Platform.ALGORAND.value else solana_templates
    if category not in mod.REQUIRED_PARAMS:
        raise TemplateError("unknown-template", f"no template for {platform}/{category}")
    return mod


def render(template_id: str, params: dict) -> dict[str, str]:
    """Render one labeled variant: template_id is `platform/category/label`."""
    parts = template_id.split("/")
    if len(parts) != 3 or parts[2] not in (VULNERABLE, SAFE, "vuln"):
        raise TemplateError("unknown-template", f"bad template id {template_id!r}")
    platform, category, label = parts
    if label == "vuln":
        label = VULNERABLE
    if platform not in (Platform.ALGORAND.value, Platform.SOLANA.value):
        raise TemplateError("unknown-template", f"unknown platform in {template_id!r}")
    mod = _builder_for(platform, category)
    missing = [k for k in mod.REQUIRED_PARAMS[category] if k not in params]
    if missing:
        raise TemplateError("missing-parameter", f"{template_id}: missing parameters {missing}")
    built = mod.build(category, params)
    return built.render("safe" if label == SAFE else "vulnerable")


def render_sample(sample: Sample) -> dict[str, str]:
    return render(f"{sample.platform}/{sample.category}/{sample.label}", sample.params)


def guard_region(platform: str, category: str, label: str, params: dict, form: str) -> list[str]:
    mod = _builder_for(platform, category)
    built = mod.build(category, params)
    return built.forms[form].guard_region("safe" if label == SAFE else "vulnerable")


def generate(seed: int, per_class: int = 5) -> CorpusManifest:
    """13 evaluated categories x 2 labels x per_class samples."""
    if per_class < 5:
        raise ValueError("per_class must be at least 5")
    samples: list[Sample] = []
    for cat in eval_categories():
        for ordinal in range(per_class):
            params = _params_for(cat.platform, cat.key, seed, ordinal)
            flavor = ordinal % FLAVOR_COUNT
            for label in (VULNERABLE, SAFE):
                renderings = render(f"{cat.platform.value}/{cat.key}/{label}", params)
                samples.append(Sample(
                    id=f"{cat.key}:{label}:{ordinal}",
                    platform=cat.platform.value,
                    category=cat.key,
                    label=label,
                    renderings=renderings,
                    template_id=f"{cat.platform.value}/{cat.key}/v{flavor}",
                    params=params,
                ))
    return CorpusManifest(samples=samples, seed=seed, per_class=per_class)


@dataclass
class ValidationReport:
    balance_violations: list[str] = field(default_factory=list)
    ground_truth_violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.balance_violations and not self.ground_truth_violations

    def lines(self) -> list[str]:
        out = [f"balance: {v}" for v in self.balance_violations]
        out.extend(f"ground-truth: {v}" for v in self.ground_truth_violations)
        return out or ["ok"]


def finding_categories(sample: Sample) -> list[str]:
    """Categories the matching static analyzer reports for a sample."""
    source = sample.rendering(ANALYSIS_SOURCE)
    if sample.platform == Platform.ALGORAND.value:
        findings = analyze_teal(source)
    else:
        findings = solana_analyzer.analyze_source(source)
    return sorted({f.category for f in findings})


def validate(manifest: CorpusManifest) -> ValidationReport:
    report = ValidationReport()
    for cat in eval_categories():
        n_vuln = manifest.counts.get((cat.key, VULNERABLE), 0)
        n_safe = manifest.counts.get((cat.key, SAFE), 0)
        if n_vuln != n_safe or n_vuln < manifest.per_class:
            report.balance_violations.append(
                f"{cat.key}: {n_vuln} vulnerable vs {n_safe} safe (expected {manifest.per_class} each)"
            )
    for sample in manifest.samples:
        found = finding_categories(sample)
        if sample.is_vulnerable and found != [sample.category]:
            report.ground_truth_violations.append(
                f"{sample.id}: expected exactly [{sample.category}], analyzer reported {found}"
            )
        elif not sample.is_vulnerable and found:
            report.ground_truth_violations.append(
                f"{sample.id}: safe sample flagged as {found}"
            )
    return report
