from __future__ import annotations

import json
from pathlib import Path

import pytest

from ftdriver.model import BaseConfig, init_base

REPO_ROOT = Path(__file__).resolve().parents[2]
TAXONOMY_FIXTURE = REPO_ROOT / "src" / "scaudit" / "data" / "taxonomy_v1.txt"


@pytest.fixture(scope="session")
def taxonomy_path() -> Path:
    assert TAXONOMY_FIXTURE.exists(), "taxonomy fixture expected in the repo"
    return TAXONOMY_FIXTURE


@pytest.fixture(scope="session")
def base_checkpoint(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("base") / "base.pt"
    init_base(BaseConfig(seed=0), path)
    return path


def write_config(path: Path, **overrides) -> Path:
    values = {
        "model_name": "tiny",
        "lora_r": 64,
        "lora_alpha": 16,
        "lora_dropout": 0.1,
        "learning_rate": 2e-4,
        "max_seq_len": 2048,
        "epochs": 4,
        "optimizer": "adam",
        "batch_size": 4,
        "target_modules": "attention",
    }
    values.update(overrides)
    lines = ["#ftconfig-v1"] + [f"{k}={v}" for k, v in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_pairs(path: Path, pairs: list[tuple[str, str, str]]) -> Path:
    lines = ["#ftpairs-v1"]
    for instruction, source, output in pairs:
        lines.append(json.dumps({"instruction": instruction, "input": source, "output": output}))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_corpus(path: Path, samples: list[dict]) -> Path:
    lines = ["#corpus-v1", json.dumps({"seed": 0, "per_class": 5})]
    lines.extend(json.dumps(s) for s in samples)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
