from __future__ import annotations

import pytest
import torch

from conftest import write_config, write_pairs
from ftdriver.cli import main
from ftdriver.formats import DatasetEmptyError
from ftdriver.model import load_adapter
from ftdriver.train import train

INSTRUCTION = (
    "Can you check if the following smart contract written in Rust "
    "contains a vulnerability? --[Source Code]--"
)


def _toy_pairs(n: int) -> list[tuple[str, str, str]]:
    outs = ["Bump Seed", "none", "Integer Flow", "none", "CPI"]
    return [
        (INSTRUCTION, f"pub fn handler_{i}(x: u64) -> u64 {{ x + {i} }}", outs[i % len(outs)])
        for i in range(n)
    ]


def test_train_smoke_single_epoch(tmp_path, base_checkpoint):
    config = write_config(tmp_path / "c.ftconfig", epochs=1, max_seq_len=192, batch_size=8)
    pairs = write_pairs(tmp_path / "pairs.jsonl", _toy_pairs(20))
    adapter = tmp_path / "adapter.pt"
    loss_log = train(config, pairs, base_checkpoint, adapter, seed=0)
    assert adapter.exists()
    assert len(loss_log) == 1
    _model, ft_config, stored_log = load_adapter(adapter)
    assert stored_log == loss_log


def test_empty_pairs_file_is_dataset_empty(tmp_path, base_checkpoint):
    config = write_config(tmp_path / "c.ftconfig", epochs=1)
    pairs = tmp_path / "pairs.jsonl"
    pairs.write_text("#ftpairs-v1\n", encoding="utf-8")
    with pytest.raises(DatasetEmptyError):
        train(config, pairs, base_checkpoint, tmp_path / "adapter.pt")


def test_config_echo_records_exact_hyperparameters(tmp_path, base_checkpoint):
    config = write_config(
        tmp_path / "c.ftconfig",
        epochs=2, max_seq_len=160, batch_size=8, lora_dropout=0.0, learning_rate=1e-3,
    )
    pairs = write_pairs(tmp_path / "pairs.jsonl", _toy_pairs(8))
    adapter = tmp_path / "adapter.pt"
    train(config, pairs, base_checkpoint, adapter, seed=0)
    _model, ft_config, loss_log = load_adapter(adapter)
    assert ft_config["lora_r"] == 64
    assert ft_config["lora_alpha"] == 16
    assert ft_config["lora_dropout"] == 0.0
    assert ft_config["learning_rate"] == 1e-3
    assert ft_config["max_seq_len"] == 160
    assert ft_config["epochs"] == 2
    assert len(loss_log) == 2


def test_training_is_seed_deterministic(tmp_path, base_checkpoint):
    config = write_config(tmp_path / "c.ftconfig", epochs=1, max_seq_len=160, batch_size=8)
    pairs = write_pairs(tmp_path / "pairs.jsonl", _toy_pairs(8))
    log_a = train(config, pairs, base_checkpoint, tmp_path / "a.pt", seed=3)
    log_b = train(config, pairs, base_checkpoint, tmp_path / "b.pt", seed=3)
    assert log_a == log_b


def test_only_lora_parameters_train(tmp_path, base_checkpoint):
    config = write_config(tmp_path / "c.ftconfig", epochs=1, max_seq_len=160, batch_size=8)
    pairs = write_pairs(tmp_path / "pairs.jsonl", _toy_pairs(4))
    adapter = tmp_path / "adapter.pt"
    train(config, pairs, base_checkpoint, adapter, seed=0)
    before = torch.load(base_checkpoint, map_location="cpu", weights_only=True)["base_state"]
    after = torch.load(adapter, map_location="cpu", weights_only=True)["base_state"]
    for key, tensor in after.items():
        bare = key.replace(".base.", ".")
        assert torch.equal(tensor, before[bare]), key


def test_cli_train_and_errors(tmp_path, base_checkpoint, capsys):
    config = write_config(tmp_path / "c.ftconfig", epochs=1, max_seq_len=160, batch_size=8)
    pairs = write_pairs(tmp_path / "pairs.jsonl", _toy_pairs(6))
    adapter = tmp_path / "adapter.pt"
    rc = main(["train", "--config", str(config), "--pairs", str(pairs),
               "--base", str(base_checkpoint), "--out", str(adapter)])
    assert rc == 0
    assert adapter.exists()

    empty = tmp_path / "empty.jsonl"
    empty.write_text("#ftpairs-v1\n", encoding="utf-8")
    rc = main(["train", "--config", str(config), "--pairs", str(empty),
               "--base", str(base_checkpoint), "--out", str(adapter)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_adapter_load_failure(tmp_path):
    from ftdriver.model import AdapterLoadError
    bogus = tmp_path / "bogus.pt"
    bogus.write_bytes(b"not a checkpoint")
    with pytest.raises(AdapterLoadError):
        load_adapter(bogus)
