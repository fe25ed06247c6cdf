"""Instruction-tuning export and training-configuration files.

Pairs are split at template granularity: all instances of one template land
on one side, so near-identical renderings never straddle the train/eval
boundary. Output labels are category display names, with the literal "none"
for the negative class.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .corpus.manifest import LLM_SOURCE, CorpusManifest, Sample
from .harness import BASELINE_USER_TEMPLATE, LANGUAGE_NAMES
from .taxonomy import get_category

NEGATIVE_LABEL = "none"

_PAIRS_HEADER = "#ftpairs-v1"
_CONFIG_HEADER = "#ftconfig-v1"

# Training defaults; epochs depend on the model family.
_CONFIG_DEFAULTS = {
    "lora_r": 64,
    "lora_alpha": 16,
    "lora_dropout": 0.1,
    "learning_rate": 2e-4,
    "max_seq_len": 2048,
    "optimizer": "adam",
    # exposed for the training driver; values are driver defaults
    "batch_size": 4,
    "target_modules": "attention",
}


class ExportError(Exception):
    pass


class SplitTooSmallError(ExportError):
    pass


class UnknownConfigKeyError(ExportError):
    pass


class PairsFormatError(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class TrainingPair:
    instruction: str
    input: str
    output: str

    def to_json(self) -> str:
        return json.dumps(
            {"instruction": self.instruction, "input": self.input, "output": self.output},
            sort_keys=True, ensure_ascii=False, separators=(",", ":"),
        )


@dataclass(frozen=True)
class FineTuneConfig:
    model_name: str
    lora_r: int = 64
    lora_alpha: int = 16
    lora_dropout: float = 0.1
    learning_rate: float = 2e-4
    max_seq_len: int = 2048
    epochs: int = 4
    optimizer: str = "adam"


def default_epochs(model_name: str) -> int:
    return 10 if "deepseek" in model_name.lower() else 4


def pair_for_sample(sample: Sample) -> TrainingPair:
    language = LANGUAGE_NAMES[sample.platform]
    instruction = BASELINE_USER_TEMPLATE.replace("[Programming Language]", language)
    output = get_category(sample.category).display_name if sample.is_vulnerable else NEGATIVE_LABEL
    return TrainingPair(instruction=instruction, input=sample.rendering(LLM_SOURCE), output=output)


def split_samples(
    manifest: CorpusManifest,
    split_fraction: float,
    seed: int,
    platform: str | None = None,
) -> tuple[list[Sample], list[Sample]]:
    """Template-disjoint (train, eval) sample split, per-category balanced."""
    if not 0 < split_fraction < 1:
        raise ExportError("split_fraction must be in (0, 1)")
    samples = [s for s in manifest.samples if platform is None or s.platform == platform]
    if not samples:
        raise ExportError(f"no samples for platform {platform!r}")

    by_category: dict[str, dict[str, list[Sample]]] = {}
    for s in samples:
        by_category.setdefault(s.category, {}).setdefault(s.template_id, []).append(s)

    rng = random.Random(seed)
    train: list[Sample] = []
    evaluation: list[Sample] = []
    for category in sorted(by_category):
        groups = by_category[category]
        n_total = sum(len(v) for v in groups.values())
        target_eval = int((1 - split_fraction) * n_total + 0.5)  # half-up
        if target_eval == 0 or target_eval >= n_total:
            raise SplitTooSmallError(
                f"split {split_fraction} leaves one side without category {category}"
            )
        order = sorted(groups)
        rng.shuffle(order)
        taken = 0
        for template_id in order:
            side = evaluation if taken < target_eval else train
            side.extend(sorted(groups[template_id], key=lambda s: s.id))
            if taken < target_eval:
                taken += len(groups[template_id])
        if taken >= n_total:
            raise SplitTooSmallError(
                f"split {split_fraction} leaves the train side without category {category}"
            )
    train.sort(key=lambda s: s.id)
    evaluation.sort(key=lambda s: s.id)
    return train, evaluation


def export_dataset(
    manifest: CorpusManifest,
    split_fraction: float,
    seed: int,
    platform: str | None = None,
) -> tuple[list[TrainingPair], list[TrainingPair]]:
    """(train, eval) pairs, template-disjoint, label-balanced within +/-1."""
    train, evaluation = split_samples(manifest, split_fraction, seed, platform)
    return [pair_for_sample(s) for s in train], [pair_for_sample(s) for s in evaluation]


def write_pairs(pairs: list[TrainingPair], path: str | Path) -> None:
    lines = [_PAIRS_HEADER]
    lines.extend(p.to_json() for p in pairs)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pairs(path: str | Path) -> list[TrainingPair]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != _PAIRS_HEADER:
        raise PairsFormatError(1, f"missing {_PAIRS_HEADER} header")
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            pairs.append(TrainingPair(instruction=obj["instruction"], input=obj["input"], output=obj["output"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise PairsFormatError(lineno, f"malformed pair: {exc}") from None
    return pairs


def write_config(model_name: str, overrides: dict | None = None, path: str | Path | None = None) -> str:
    """key=value config text with defaults; overridden keys are marked."""
    if not model_name:
        raise ExportError("model_name must be non-empty")
    overrides = dict(overrides or {})
    values = dict(_CONFIG_DEFAULTS)
    values["epochs"] = default_epochs(model_name)
    unknown = [k for k in overrides if k not in values]
    if unknown:
        raise UnknownConfigKeyError(f"unknown config keys: {unknown}")
    values.update(overrides)

    lines = [_CONFIG_HEADER, f"model_name={model_name}"]
    for key in sorted(values):
        marker = "  # overridden" if key in overrides else ""
        lines.append(f"{key}={values[key]}{marker}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_config(path: str | Path) -> FineTuneConfig:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != _CONFIG_HEADER:
        raise ExportError(f"missing {_CONFIG_HEADER} header")
    raw: dict[str, str] = {}
    for line in lines[1:]:
        line = line.split("  #", 1)[0].strip()
        if not line or "=" not in line:
            continue
        key, value = line.split("=", 1)
        raw[key.strip()] = value.strip()
    return FineTuneConfig(
        model_name=raw.get("model_name", "model"),
        lora_r=int(raw.get("lora_r", 64)),
        lora_alpha=int(raw.get("lora_alpha", 16)),
        lora_dropout=float(raw.get("lora_dropout", 0.1)),
        learning_rate=float(raw.get("learning_rate", 2e-4)),
        max_seq_len=int(raw.get("max_seq_len", 2048)),
        epochs=int(raw.get("epochs", 4)),
        optimizer=raw.get("optimizer", "adam"),
    )
