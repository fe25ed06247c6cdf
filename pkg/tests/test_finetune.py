from __future__ import annotations

import pytest

from scaudit.finetune import (
    NEGATIVE_LABEL,
    ExportError,
    PairsFormatError,
    SplitTooSmallError,
    UnknownConfigKeyError,
    default_epochs,
    export_dataset,
    load_config,
    load_pairs,
    pair_for_sample,
    split_samples,
    write_config,
    write_pairs,
)
from scaudit.taxonomy import parse_category_label


def test_split_130_at_80_percent(corpus42):
    train, evaluation = export_dataset(corpus42, 0.8, 42)
    assert len(train) == 104
    assert len(evaluation) == 26


def test_split_sides_are_template_disjoint(corpus42):
    train, evaluation = split_samples(corpus42, 0.8, 42)
    train_templates = {s.template_id for s in train}
    eval_templates = {s.template_id for s in evaluation}
    assert train_templates.isdisjoint(eval_templates)


def test_split_keeps_every_category_on_both_sides(corpus42):
    train, evaluation = split_samples(corpus42, 0.8, 42)
    assert {s.category for s in train} == {s.category for s in evaluation}


def test_split_label_balance_within_one(corpus42):
    train, evaluation = split_samples(corpus42, 0.8, 42)
    for side in (train, evaluation):
        per_cat: dict[str, dict[str, int]] = {}
        for s in side:
            per_cat.setdefault(s.category, {"vulnerable": 0, "safe": 0})[s.label] += 1
        for category, counts in per_cat.items():
            assert abs(counts["vulnerable"] - counts["safe"]) <= 1, category


def test_split_too_small(corpus42):
    with pytest.raises(SplitTooSmallError):
        export_dataset(corpus42, 0.99, 42)


def test_split_fraction_bounds(corpus42):
    with pytest.raises(ExportError):
        export_dataset(corpus42, 1.0, 42)


def test_reexport_is_byte_identical(tmp_path, corpus42):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_pairs(export_dataset(corpus42, 0.8, 42)[0], a)
    write_pairs(export_dataset(corpus42, 0.8, 42)[0], b)
    assert a.read_bytes() == b.read_bytes()


def test_vulnerable_rekey_pair_output(corpus42):
    sample = corpus42.sample_by_id("unchecked_rekey_to:vulnerable:0")
    pair = pair_for_sample(sample)
    assert pair.output == "Unchecked RekeyTo"
    assert pair.instruction.startswith("Can you check if the following smart contract written in PyTeal")
    assert pair.input == sample.renderings["llm_source"]


def test_safe_pairs_use_negative_label(corpus42):
    sample = corpus42.sample_by_id("bump_seed:safe:0")
    assert pair_for_sample(sample).output == NEGATIVE_LABEL


def test_outputs_round_trip_through_label_parser(corpus42):
    train, evaluation = export_dataset(corpus42, 0.8, 42)
    for pair in train + evaluation:
        if pair.output == NEGATIVE_LABEL:
            continue
        platform = "algorand" if "PyTeal" in pair.instruction else "solana"
        got = parse_category_label(pair.output, platform)
        assert got is not None and got.display_name == pair.output


def test_per_platform_export(corpus42):
    train, evaluation = split_samples(corpus42, 0.8, 42, platform="solana")
    assert {s.platform for s in train + evaluation} == {"solana"}
    assert len(train) + len(evaluation) == 50


def test_pairs_file_round_trip(tmp_path, corpus42):
    train, _ = export_dataset(corpus42, 0.8, 42)
    path = tmp_path / "pairs.jsonl"
    write_pairs(train, path)
    assert load_pairs(path) == train


def test_pairs_header_enforced(tmp_path):
    path = tmp_path / "pairs.jsonl"
    path.write_text('{"instruction": "x"}\n', encoding="utf-8")
    with pytest.raises(PairsFormatError):
        load_pairs(path)


def test_write_config_deepseek_defaults(tmp_path):
    text = write_config("deepseek", {}, tmp_path / "c.ftconfig")
    config = load_config(tmp_path / "c.ftconfig")
    assert config.epochs == 10
    assert config.lora_r == 64
    assert config.lora_alpha == 16
    assert config.lora_dropout == 0.1
    assert config.learning_rate == 2e-4
    assert config.max_seq_len == 2048
    assert "epochs=10" in text


def test_write_config_llama_epochs(tmp_path):
    write_config("llama", {}, tmp_path / "c.ftconfig")
    assert load_config(tmp_path / "c.ftconfig").epochs == 4
    assert default_epochs("LLaMA-3-8B") == 4
    assert default_epochs("DeepSeek-R1-Distill-Qwen-14B") == 10


def test_write_config_marks_overrides(tmp_path):
    text = write_config("llama", {"epochs": 1}, tmp_path / "c.ftconfig")
    assert "epochs=1  # overridden" in text
    assert load_config(tmp_path / "c.ftconfig").epochs == 1


def test_write_config_rejects_unknown_key():
    with pytest.raises(UnknownConfigKeyError):
        write_config("llama", {"learning_rte": 1e-3})


def test_write_config_requires_model_name():
    with pytest.raises(ExportError):
        write_config("", {})
