"""Algorand snippet templates: one scenario family per category.

Each template renders two forms from the same parameters: a PyTeal-idiom
contract (`llm_source`) and TEAL assembly (`analysis_source`). The two label
variants of a template differ only in a single guard slot, which keeps
vulnerable/safe twins minimal pairs in both forms.
"""
from __future__ import annotations

from dataclasses import dataclass

GUARD_MARK = "{{GUARD}}"

# Escrow/application scenario names, one per flavor.
_ESCROW_NAMES = ("payout_escrow", "vault_release", "channel_settle", "grant_disburse", "refund_gate")
_ASSET_NAMES = ("asset_escrow", "token_release", "reward_transfer", "drop_claim", "asset_refund")
_APP_NAMES = ("counter_app", "registry_app", "tally_app", "config_app", "ledger_app")

# Per-flavor structural knobs: hygiene-check order, optional group-size
# check, and the comparison used for the amount bound.
_FLAVOR_PERMS = (
    (0, 1, 2, 3, 4),
    (2, 0, 3, 1, 4),
    (4, 3, 2, 1, 0),
    (1, 4, 0, 2, 3),
    (3, 2, 4, 0, 1),
)
_FLAVOR_GROUP_CHECK = (False, True, False, True, True)
_FLAVOR_AMOUNT_OP = ("<=", "<", "<=", "<=", "<")


@dataclass
class FormBody:
    lines: list[str]
    guard_safe: list[str]
    guard_vuln: list[str]

    def render(self, label: str) -> str:
        guard = self.guard_safe if label == "safe" else self.guard_vuln
        out: list[str] = []
        for line in self.lines:
            if line.strip() == GUARD_MARK:
                indent = line[: len(line) - len(line.lstrip())]
                out.extend(indent + g for g in guard)
            else:
                out.append(line)
        return "\n".join(out) + "\n"

    def guard_region(self, label: str) -> list[str]:
        return list(self.guard_safe if label == "safe" else self.guard_vuln)


@dataclass
class BuiltTemplate:
    forms: dict[str, FormBody]  # llm_source / analysis_source

    def render(self, label: str) -> dict[str, str]:
        return {form: body.render(label) for form, body in self.forms.items()}


@dataclass(frozen=True)
class _Check:
    teal: tuple[str, ...]
    pyteal: str


def _payment_checks(p: dict) -> tuple[_Check, list[_Check], _Check]:
    """(type check, permutable hygiene checks, amount check) for payments."""
    hygiene = [
        _Check(("txn Fee", f"int {p['fee_max']}", "<=", "assert"),
               f"Txn.fee() <= Int({p['fee_max']})"),
        _Check(("txn CloseRemainderTo", "global ZeroAddress", "==", "assert"),
               "Txn.close_remainder_to() == Global.zero_address()"),
        _Check(("txn AssetCloseTo", "global ZeroAddress", "==", "assert"),
               "Txn.asset_close_to() == Global.zero_address()"),
        _Check(("txn Receiver", f"addr {p['receiver']}", "==", "assert"),
               f'Txn.receiver() == Addr("{p["receiver"]}")'),
        _Check(("txn AssetReceiver", "global ZeroAddress", "==", "assert"),
               "Txn.asset_receiver() == Global.zero_address()"),
        _Check(("txn RekeyTo", "global ZeroAddress", "==", "assert"),
               "Txn.rekey_to() == Global.zero_address()"),
    ]
    type_check = _Check(("txn TypeEnum", "int pay", "==", "assert"),
                        "Txn.type_enum() == TxnType.Payment")
    op = _FLAVOR_AMOUNT_OP[p["flavor"]]
    amount = _Check(("txn Amount", f"int {p['amount']}", op, "assert"),
                    f"Txn.amount() {op} Int({p['amount']})")
    return type_check, hygiene, amount


def _asset_checks(p: dict) -> tuple[_Check, list[_Check], _Check]:
    hygiene = [
        _Check(("txn Fee", f"int {p['fee_max']}", "<=", "assert"),
               f"Txn.fee() <= Int({p['fee_max']})"),
        _Check(("txn CloseRemainderTo", "global ZeroAddress", "==", "assert"),
               "Txn.close_remainder_to() == Global.zero_address()"),
        _Check(("txn AssetCloseTo", "global ZeroAddress", "==", "assert"),
               "Txn.asset_close_to() == Global.zero_address()"),
        _Check(("txn Receiver", "global ZeroAddress", "==", "assert"),
               "Txn.receiver() == Global.zero_address()"),
        _Check(("txn AssetReceiver", f"addr {p['asset_receiver']}", "==", "assert"),
               f'Txn.asset_receiver() == Addr("{p["asset_receiver"]}")'),
        _Check(("txn RekeyTo", "global ZeroAddress", "==", "assert"),
               "Txn.rekey_to() == Global.zero_address()"),
    ]
    type_check = _Check(("txn TypeEnum", "int axfer", "==", "assert"),
                        "Txn.type_enum() == TxnType.AssetTransfer")
    op = _FLAVOR_AMOUNT_OP[p["flavor"]]
    amount = _Check(("txn AssetAmount", f"int {p['amount']}", op, "assert"),
                    f"Txn.asset_amount() {op} Int({p['amount']})")
    return type_check, hygiene, amount


def _escrow_template(p: dict, *, asset: bool, guard_index: int) -> BuiltTemplate:
    """Logic-signature escrow; the check at guard_index becomes the guard slot."""
    flavor = p["flavor"]
    type_check, hygiene, amount = (_asset_checks if asset else _payment_checks)(p)
    guard = hygiene.pop(guard_index)
    perm = _FLAVOR_PERMS[flavor]
    hygiene = [hygiene[j] for j in perm if j < len(hygiene)]
    name = (_ASSET_NAMES if asset else _ESCROW_NAMES)[flavor]

    checks: list[_Check] = [type_check]
    if _FLAVOR_GROUP_CHECK[flavor]:
        checks.append(_Check(("global GroupSize", "int 1", "==", "assert"),
                             "Global.group_size() == Int(1)"))
    checks.extend(hygiene)
    checks.append(amount)

    teal_lines: list[str] = [f"#pragma version {p['teal_version']}"]
    for c in checks:
        teal_lines.extend(c.teal)
    teal_lines.append(GUARD_MARK)
    teal_lines.extend(["int 1", "return"])
    teal = FormBody(teal_lines, guard_safe=list(guard.teal), guard_vuln=[])

    py_lines = [
        "from pyteal import *",
        "",
        "",
        f"def {name}():",
        "    return And(",
    ]
    py_lines.extend(f"        {c.pyteal}," for c in checks)
    py_lines.append("        " + GUARD_MARK)
    py_lines.extend([
        "    )",
        "",
        "",
        'if __name__ == "__main__":',
        f"    print(compileTeal({name}(), mode=Mode.Signature, version={p['teal_version']}))",
    ])
    pyteal = FormBody(py_lines, guard_safe=[guard.pyteal + ","], guard_vuln=[])
    return BuiltTemplate(forms={"llm_source": pyteal, "analysis_source": teal})


_HYGIENE_INDEX = {
    "unchecked_transaction_fee": 0,
    "unchecked_close_remainder_to": 1,
    "unchecked_asset_close_to": 2,
    "unchecked_payment_receiver": 3,
    "unchecked_asset_receiver": 4,
    "unchecked_rekey_to": 5,
}


def _app_template(p: dict, *, on_completion: str) -> BuiltTemplate:
    """Stateful application with an OnCompletion dispatch; guard slot is the
    Sender check inside the update/delete handler."""
    flavor = p["flavor"]
    name = _APP_NAMES[flavor]
    handler = "handle_update" if on_completion == "UpdateApplication" else "handle_delete"

    field_checks = [
        _Check(("txn RekeyTo", "global ZeroAddress", "==", "assert"),
               "Txn.rekey_to() == Global.zero_address()"),
        _Check(("txn CloseRemainderTo", "global ZeroAddress", "==", "assert"),
               "Txn.close_remainder_to() == Global.zero_address()"),
        _Check(("txn AssetCloseTo", "global ZeroAddress", "==", "assert"),
               "Txn.asset_close_to() == Global.zero_address()"),
        _Check(("txn Receiver", "global ZeroAddress", "==", "assert"),
               "Txn.receiver() == Global.zero_address()"),
        _Check(("txn AssetReceiver", "global ZeroAddress", "==", "assert"),
               "Txn.asset_receiver() == Global.zero_address()"),
        _Check(("txn Fee", f"int {p['fee_max']}", "<=", "assert"),
               f"Txn.fee() <= Int({p['fee_max']})"),
    ]
    perm = _FLAVOR_PERMS[flavor]
    order = list(perm) + [i for i in range(len(field_checks)) if i not in perm]
    field_checks = [field_checks[i] for i in order]

    key, step = p["global_key"], p["step"]
    if on_completion == "UpdateApplication":
        main_teal = [f'byte "{key}"', f'byte "{key}"', "app_global_get", f"int {step}", "+", "app_global_put"]
        main_py = f'App.globalPut(Bytes("{key}"), App.globalGet(Bytes("{key}")) + Int({step})),'
    else:
        main_teal = [f'byte "{key}"', f"int {step}", "app_global_put"]
        main_py = f'App.globalPut(Bytes("{key}"), Int({step})),'

    teal_lines: list[str] = [f"#pragma version {p['teal_version']}"]
    for c in field_checks:
        teal_lines.extend(c.teal)
    teal_lines.extend([
        "txn OnCompletion",
        "int NoOp",
        "==",
        "bnz main",
        "txn OnCompletion",
        f"int {on_completion}",
        "==",
        f"bnz {handler}",
        "err",
        "main:",
        *main_teal,
        "int 1",
        "return",
        f"{handler}:",
        GUARD_MARK,
        "int 1",
        "return",
    ])
    teal = FormBody(
        teal_lines,
        guard_safe=["txn Sender", "global CreatorAddress", "==", "assert"],
        guard_vuln=[],
    )

    on_handler = "on_update" if on_completion == "UpdateApplication" else "on_delete"
    py_lines = [
        "from pyteal import *",
        "",
        "",
        f"def {name}():",
        "    field_checks = And(",
        *(f"        {c.pyteal}," for c in field_checks),
        "    )",
        "    on_call = Seq(",
        f"        {main_py}",
        "        Approve(),",
        "    )",
        f"    {on_handler} = Seq(",
        "        " + GUARD_MARK,
        "        Approve(),",
        "    )",
        "    return Seq(",
        "        Assert(field_checks),",
        "        Cond(",
        "            [Txn.on_completion() == OnComplete.NoOp, on_call],",
        f"            [Txn.on_completion() == OnComplete.{on_completion}, {on_handler}],",
        "        ),",
        "    )",
        "",
        "",
        'if __name__ == "__main__":',
        f"    print(compileTeal({name}(), mode=Mode.Application, version={p['teal_version']}))",
    ]
    pyteal = FormBody(
        py_lines,
        guard_safe=["Assert(Txn.sender() == Global.creator_address()),"],
        guard_vuln=[],
    )
    return BuiltTemplate(forms={"llm_source": pyteal, "analysis_source": teal})


def build(category: str, params: dict) -> BuiltTemplate:
    if category == "arbitrary_update":
        return _app_template(params, on_completion="UpdateApplication")
    if category == "arbitrary_delete":
        return _app_template(params, on_completion="DeleteApplication")
    if category in _HYGIENE_INDEX:
        asset = category in {"unchecked_asset_close_to", "unchecked_asset_receiver"}
        return _escrow_template(params, asset=asset, guard_index=_HYGIENE_INDEX[category])
    raise KeyError(category)


CATEGORIES = (
    "arbitrary_delete",
    "arbitrary_update",
    "unchecked_asset_receiver",
    "unchecked_payment_receiver",
    "unchecked_asset_close_to",
    "unchecked_close_remainder_to",
    "unchecked_rekey_to",
    "unchecked_transaction_fee",
)

REQUIRED_PARAMS = {
    "arbitrary_delete": ("flavor", "teal_version", "fee_max", "global_key", "step"),
    "arbitrary_update": ("flavor", "teal_version", "fee_max", "global_key", "step"),
    "unchecked_asset_receiver": ("flavor", "teal_version", "fee_max", "amount", "asset_receiver"),
    "unchecked_payment_receiver": ("flavor", "teal_version", "fee_max", "amount", "receiver"),
    "unchecked_asset_close_to": ("flavor", "teal_version", "fee_max", "amount", "asset_receiver"),
    "unchecked_close_remainder_to": ("flavor", "teal_version", "fee_max", "amount", "receiver"),
    "unchecked_rekey_to": ("flavor", "teal_version", "fee_max", "amount", "receiver"),
    "unchecked_transaction_fee": ("flavor", "teal_version", "fee_max", "amount", "receiver"),
}
