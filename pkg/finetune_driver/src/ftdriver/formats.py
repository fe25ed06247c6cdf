"""Readers and writers for the pipeline's text file contracts.

The driver talks to the analysis toolkit only through files:
  #ftpairs-v1      training pairs, one JSON object per line
  #ftconfig-v1     flat key=value training configuration
  #corpus-v1       labeled samples (id, platform, renderings)
  #taxonomy-v1     category table (key|platform|owasp|display|aliases|scope)
  #predictions-v1  pipe-delimited prediction records (written here)
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path


class FormatError(Exception):
    pass


class InvalidConfigError(FormatError):
    pass


class DatasetEmptyError(FormatError):
    pass


# --- training pairs ---------------------------------------------------------

@dataclass(frozen=True)
class Pair:
    instruction: str
    input: str
    output: str


def load_pairs(path: str | Path) -> list[Pair]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "#ftpairs-v1":
        raise FormatError(f"{path}: missing #ftpairs-v1 header")
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            pairs.append(Pair(obj["instruction"], obj["input"], obj["output"]))
        except (json.JSONDecodeError, KeyError) as exc:
            raise FormatError(f"{path}:{lineno}: bad pair record: {exc}") from None
    if not pairs:
        raise DatasetEmptyError(f"{path}: no training pairs")
    return pairs


# --- training config --------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    model_name: str = "model"
    lora_r: int = 64
    lora_alpha: int = 16
    lora_dropout: float = 0.1
    learning_rate: float = 2e-4
    max_seq_len: int = 2048
    epochs: int = 4
    optimizer: str = "adam"
    batch_size: int = 4
    target_modules: str = "attention"  # "attention" or "all"


def load_config(path: str | Path) -> TrainConfig:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "#ftconfig-v1":
        raise InvalidConfigError(f"{path}: missing #ftconfig-v1 header")
    raw: dict[str, str] = {}
    for line in lines[1:]:
        line = line.split("  #", 1)[0].strip()
        if not line or "=" not in line:
            continue
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    try:
        config = TrainConfig(
            model_name=raw.get("model_name", "model"),
            lora_r=int(raw.get("lora_r", 64)),
            lora_alpha=int(raw.get("lora_alpha", 16)),
            lora_dropout=float(raw.get("lora_dropout", 0.1)),
            learning_rate=float(raw.get("learning_rate", 2e-4)),
            max_seq_len=int(raw.get("max_seq_len", 2048)),
            epochs=int(raw.get("epochs", 4)),
            optimizer=raw.get("optimizer", "adam"),
            batch_size=int(raw.get("batch_size", 4)),
            target_modules=raw.get("target_modules", "attention"),
        )
    except ValueError as exc:
        raise InvalidConfigError(f"{path}: {exc}") from None
    if config.lora_r <= 0 or config.epochs <= 0 or config.max_seq_len <= 0:
        raise InvalidConfigError(f"{path}: lora_r, epochs and max_seq_len must be positive")
    if config.optimizer != "adam":
        raise InvalidConfigError(f"{path}: unsupported optimizer {config.optimizer!r}")
    if config.target_modules not in ("attention", "all"):
        raise InvalidConfigError(f"{path}: target_modules must be 'attention' or 'all'")
    return config


# --- corpus manifest (read-only subset) --------------------------------------

@dataclass(frozen=True)
class CorpusSample:
    id: str
    platform: str
    category: str
    label: str
    source: str


def load_corpus(path: str | Path) -> list[CorpusSample]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "#corpus-v1":
        raise FormatError(f"{path}: missing #corpus-v1 header")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = json.loads(line)
        if "id" not in obj:  # manifest metadata line
            continue
        try:
            samples.append(CorpusSample(
                id=obj["id"],
                platform=obj["platform"],
                category=obj["category"],
                label=obj["label"],
                source=obj["renderings"]["llm_source"],
            ))
        except KeyError as exc:
            raise FormatError(f"{path}:{lineno}: bad sample record: {exc}") from None
    if not samples:
        raise DatasetEmptyError(f"{path}: no samples")
    return samples


# --- taxonomy fixture (label mapping) ----------------------------------------

@dataclass(frozen=True)
class LabelEntry:
    key: str
    platform: str
    terms: tuple[str, ...]  # display name + aliases, lowercased


def load_taxonomy(path: str | Path) -> list[LabelEntry]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "#taxonomy-v1":
        raise FormatError(f"{path}: missing #taxonomy-v1 header")
    entries = []
    for line in lines[1:]:
        if not line.strip() or line.startswith("#"):
            continue
        key, platform, _owasp, display, aliases, _scope = line.split("|")
        terms = [display.lower()] + [a.strip().lower() for a in aliases.split(",") if a.strip()]
        seen: dict[str, None] = {}
        for t in terms:
            seen.setdefault(t, None)
        entries.append(LabelEntry(key=key, platform=platform, terms=tuple(seen)))
    return entries


_NEGATIVE = re.compile(r"(?<![\w])(?:none|no vulnerability|no vulnerabilities|not vulnerable)(?![\w])", re.IGNORECASE)


def map_output_to_label(text: str, platform: str, entries: list[LabelEntry]) -> str | None:
    """Generated text -> category key, or None for the negative class.

    Mirrors the toolkit's post-processing rule: explicit negatives first,
    then earliest whole-word match over display names and aliases.
    """
    if _NEGATIVE.search(text):
        return None
    best: tuple[int, int] | None = None
    best_key = None
    for order, entry in enumerate(entries):
        if entry.platform != platform:
            continue
        for term in entry.terms:
            m = re.search(r"(?<![\w])" + re.escape(term) + r"(?![\w])", text, re.IGNORECASE)
            if m and (best is None or (m.start(), order) < best):
                best = (m.start(), order)
                best_key = entry.key
    return best_key


# --- prediction records -------------------------------------------------------

@dataclass(frozen=True)
class Prediction:
    sample_id: str
    run_index: int
    mode: str
    parsed_category: str | None
    latency_ms: int
    raw_response: str


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r").replace("|", "\\|")


def write_predictions(records: list[Prediction], path: str | Path) -> None:
    lines = ["#predictions-v1"]
    for r in records:
        lines.append("|".join([
            r.sample_id,
            str(r.run_index),
            r.mode,
            r.parsed_category or "",
            "true" if r.parsed_category else "false",
            str(r.latency_ms),
            _escape(r.raw_response),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
