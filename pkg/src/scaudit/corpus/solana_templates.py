"""Solana snippet templates: one handler scenario per category.

A single Rust-style rendering serves both the prompt and the analyzer
(`llm_source` == `analysis_source`). Every template carries the canonical
hygiene for the categories it is NOT about (signer test, owner test,
discriminator check, bound comparison, known-id comparison) so the scanner
attributes exactly one category to each vulnerable twin.
"""
from __future__ import annotations

from .algorand_templates import GUARD_MARK, BuiltTemplate, FormBody

_FN_VERBS = ("process", "handle", "execute", "run", "apply")

_COMMON_USE = [
    "use solana_program::{",
    "    account_info::{next_account_info, AccountInfo},",
    "    entrypoint::ProgramResult,",
    "    program_error::ProgramError,",
    "    pubkey::Pubkey,",
    "};",
]


def _fn_name(p: dict, action: str) -> str:
    return f"{_FN_VERBS[p['flavor']]}_{action}"


def _missing_key_check(p: dict) -> BuiltTemplate:
    fn = _fn_name(p, p["action"])
    lines = [
        *_COMMON_USE,
        "",
        f"const {p['tag_const']}: u8 = {p['tag']};",
        "",
        f"pub struct {p['struct']} {{",
        "    pub admin: Pubkey,",
        "    pub locked: bool,",
        "}",
        "",
        f"impl {p['struct']} {{",
        f"    pub fn unpack(_data: &[u8]) -> Result<{p['struct']}, ProgramError> {{",
        "        unimplemented!()",
        "    }",
        "}",
        "",
        f"pub fn {fn}(",
        "    program_id: &Pubkey,",
        "    accounts: &[AccountInfo],",
        "    amount: u64,",
        ") -> ProgramResult {",
        "    let account_iter = &mut accounts.iter();",
        f"    let {p['vault']} = next_account_info(account_iter)?;",
        f"    let {p['authority']} = next_account_info(account_iter)?;",
        f"    let {p['recipient']} = next_account_info(account_iter)?;",
        "",
        f"    if {p['vault']}.owner != program_id {{",
        "        return Err(ProgramError::IncorrectProgramId);",
        "    }",
        f"    if !{p['authority']}.is_signer {{",
        "        return Err(ProgramError::MissingRequiredSignature);",
        "    }",
        f"    let data = {p['vault']}.data.borrow();",
        f"    if data[0] != {p['tag_const']} {{",
        "        return Err(ProgramError::InvalidAccountData);",
        "    }",
        f"    let state = {p['struct']}::unpack(&data)?;",
        "    " + GUARD_MARK,
        f"    let held = **{p['vault']}.lamports.borrow();",
        "    if amount > held {",
        "        return Err(ProgramError::InsufficientFunds);",
        "    }",
        "    drop(data);",
        f"    **{p['vault']}.try_borrow_mut_lamports()? -= amount;",
        f"    **{p['recipient']}.try_borrow_mut_lamports()? += amount;",
        "    Ok(())",
        "}",
    ]
    guard_safe = [
        f"if {p['authority']}.key != &state.admin {{",
        "    return Err(ProgramError::IllegalOwner);",
        "}",
    ]
    body = FormBody(lines, guard_safe=guard_safe, guard_vuln=["let _ = &state.admin;"])
    return BuiltTemplate(forms={"llm_source": body, "analysis_source": body})


def _integer_flow(p: dict) -> BuiltTemplate:
    fn = _fn_name(p, p["action"])
    lines = [
        *_COMMON_USE,
        "",
        f"pub fn {fn}(",
        "    program_id: &Pubkey,",
        "    accounts: &[AccountInfo],",
        "    amount: u64,",
        ") -> ProgramResult {",
        "    let account_iter = &mut accounts.iter();",
        f"    let {p['vault']} = next_account_info(account_iter)?;",
        f"    let {p['payer']} = next_account_info(account_iter)?;",
        "",
        f"    if {p['vault']}.owner != program_id {{",
        "        return Err(ProgramError::IncorrectProgramId);",
        "    }",
        f"    if !{p['payer']}.is_signer {{",
        "        return Err(ProgramError::MissingRequiredSignature);",
        "    }",
        f"    let current = **{p['vault']}.lamports.borrow();",
        "    " + GUARD_MARK,
        f"    **{p['vault']}.try_borrow_mut_lamports()? = new_balance;",
        "    Ok(())",
        "}",
    ]
    guard_vuln = ["let new_balance = current + amount;"]
    guard_safe = [
        "let new_balance = current",
        "    .checked_add(amount)",
        "    .ok_or(ProgramError::InvalidInstructionData)?;",
    ]
    body = FormBody(lines, guard_safe=guard_safe, guard_vuln=guard_vuln)
    return BuiltTemplate(forms={"llm_source": body, "analysis_source": body})


def _type_confusion(p: dict) -> BuiltTemplate:
    fn = _fn_name(p, p["action"])
    lines = [
        "use borsh::{BorshDeserialize, BorshSerialize};",
        *_COMMON_USE,
        "",
        f"const {p['tag_const']}: u8 = {p['tag']};",
        "",
        "#[derive(BorshDeserialize, BorshSerialize)]",
        f"pub struct {p['struct']} {{",
        "    pub authority: Pubkey,",
        "    pub limit: u64,",
        "}",
        "",
        f"pub fn {fn}(",
        "    program_id: &Pubkey,",
        "    accounts: &[AccountInfo],",
        "    new_limit: u64,",
        ") -> ProgramResult {",
        "    let account_iter = &mut accounts.iter();",
        f"    let {p['config']} = next_account_info(account_iter)?;",
        f"    let {p['admin']} = next_account_info(account_iter)?;",
        "",
        f"    if {p['config']}.owner != program_id {{",
        "        return Err(ProgramError::IncorrectProgramId);",
        "    }",
        f"    if !{p['admin']}.is_signer {{",
        "        return Err(ProgramError::MissingRequiredSignature);",
        "    }",
        f"    let raw = {p['config']}.data.borrow();",
        "    " + GUARD_MARK,
        f"    let mut settings = {p['struct']}::try_from_slice(&raw)?;",
        f"    if {p['admin']}.key != &settings.authority {{",
        "        return Err(ProgramError::IllegalOwner);",
        "    }",
        "    settings.limit = new_limit;",
        "    drop(raw);",
        f"    settings.serialize(&mut &mut {p['config']}.data.borrow_mut()[..])?;",
        "    Ok(())",
        "}",
    ]
    guard_safe = [
        f"if raw[0] != {p['tag_const']} {{",
        "    return Err(ProgramError::InvalidAccountData);",
        "}",
    ]
    body = FormBody(lines, guard_safe=guard_safe, guard_vuln=[])
    return BuiltTemplate(forms={"llm_source": body, "analysis_source": body})


def _cpi_unchecked(p: dict) -> BuiltTemplate:
    fn = _fn_name(p, p["action"])
    lines = [
        "use solana_program::{",
        "    account_info::{next_account_info, AccountInfo},",
        "    entrypoint::ProgramResult,",
        "    instruction::{AccountMeta, Instruction},",
        "    program::invoke,",
        "    program_error::ProgramError,",
        "    pubkey::Pubkey,",
        "};",
        "",
        f"const {p['known_id']}: Pubkey = Pubkey::new_from_array([{p['id_byte']}u8; 32]);",
        "",
        f"pub fn {fn}(",
        "    accounts: &[AccountInfo],",
        "    amount: u64,",
        ") -> ProgramResult {",
        "    let account_iter = &mut accounts.iter();",
        f"    let {p['source']} = next_account_info(account_iter)?;",
        f"    let {p['dest']} = next_account_info(account_iter)?;",
        f"    let {p['wallet']} = next_account_info(account_iter)?;",
        f"    let {p['target_prog']} = next_account_info(account_iter)?;",
        "",
        f"    if !{p['wallet']}.is_signer {{",
        "        return Err(ProgramError::MissingRequiredSignature);",
        "    }",
        "    " + GUARD_MARK,
        "    let instruction = Instruction {",
        f"        program_id: *{p['target_prog']}.key,",
        "        accounts: vec![",
        f"            AccountMeta::new(*{p['source']}.key, false),",
        f"            AccountMeta::new(*{p['dest']}.key, false),",
        f"            AccountMeta::new_readonly(*{p['wallet']}.key, true),",
        "        ],",
        "        data: amount.to_le_bytes().to_vec(),",
        "    };",
        "    invoke(",
        "        &instruction,",
        f"        &[{p['source']}.clone(), {p['dest']}.clone(), {p['wallet']}.clone(), {p['target_prog']}.clone()],",
        "    )?;",
        "    Ok(())",
        "}",
    ]
    guard_safe = [
        f"if {p['target_prog']}.key != &{p['known_id']} {{",
        "    return Err(ProgramError::IncorrectProgramId);",
        "}",
    ]
    body = FormBody(lines, guard_safe=guard_safe, guard_vuln=[])
    return BuiltTemplate(forms={"llm_source": body, "analysis_source": body})


def _bump_seed(p: dict) -> BuiltTemplate:
    fn = _fn_name(p, p["action"])
    lines = [
        *_COMMON_USE,
        "",
        f"pub fn {fn}(",
        "    program_id: &Pubkey,",
        "    accounts: &[AccountInfo],",
        "    bump: u8,",
        ") -> ProgramResult {",
        "    let account_iter = &mut accounts.iter();",
        f"    let {p['payer']} = next_account_info(account_iter)?;",
        f"    let {p['pda']} = next_account_info(account_iter)?;",
        "",
        f"    if !{p['payer']}.is_signer {{",
        "        return Err(ProgramError::MissingRequiredSignature);",
        "    }",
        f"    if {p['pda']}.owner != program_id {{",
        "        return Err(ProgramError::IncorrectProgramId);",
        "    }",
        "    " + GUARD_MARK,
        "    let derived = Pubkey::create_program_address(",
        f"        &[b\"{p['seed']}\", {p['payer']}.key.as_ref(), &[bump]],",
        "        program_id,",
        "    )?;",
        f"    if derived != *{p['pda']}.key {{",
        "        return Err(ProgramError::InvalidSeeds);",
        "    }",
        f"    {p['pda']}.data.borrow_mut()[0] = bump;",
        "    Ok(())",
        "}",
    ]
    guard_safe = [
        "let (_expected, canonical_bump) =",
        f"    Pubkey::find_program_address(&[b\"{p['seed']}\", {p['payer']}.key.as_ref()], program_id);",
        "if bump != canonical_bump {",
        "    return Err(ProgramError::InvalidSeeds);",
        "}",
    ]
    body = FormBody(lines, guard_safe=guard_safe, guard_vuln=[])
    return BuiltTemplate(forms={"llm_source": body, "analysis_source": body})


_BUILDERS = {
    "missing_key_check": _missing_key_check,
    "integer_flow": _integer_flow,
    "type_confusion": _type_confusion,
    "cpi_unchecked": _cpi_unchecked,
    "bump_seed": _bump_seed,
}

CATEGORIES = tuple(_BUILDERS)

REQUIRED_PARAMS = {
    "missing_key_check": ("flavor", "action", "vault", "authority", "recipient", "struct", "tag_const", "tag"),
    "integer_flow": ("flavor", "action", "vault", "payer"),
    "type_confusion": ("flavor", "action", "config", "admin", "struct", "tag_const", "tag"),
    "cpi_unchecked": ("flavor", "action", "source", "dest", "wallet", "target_prog", "known_id", "id_byte"),
    "bump_seed": ("flavor", "action", "payer", "pda", "seed"),
}


def build(category: str, params: dict) -> BuiltTemplate:
    return _BUILDERS[category](params)
