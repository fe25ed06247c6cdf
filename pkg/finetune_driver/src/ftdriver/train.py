"""Adapter training over exported instruction pairs.

Sequences are `BOS + prompt + answer + EOS` with the prompt taken from the
pair's instruction (source code substituted into its placeholder). Loss is
computed on answer tokens only. When a sequence exceeds max_seq_len the
head of the prompt is dropped so the answer always stays in view.
"""
from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

import torch
import torch.nn.functional as F

from .formats import Pair, TrainConfig, load_config, load_pairs
from .model import BOS, EOS, TinyLM, apply_lora, encode, load_base, save_adapter

SOURCE_PLACEHOLDER = "[Source Code]"
ANSWER_SEPARATOR = "\n### Vulnerability: "


def prompt_text(instruction: str, source: str) -> str:
    if SOURCE_PLACEHOLDER in instruction:
        body = instruction.replace(SOURCE_PLACEHOLDER, source)
    else:
        body = f"{instruction}\n{source}"
    return body + ANSWER_SEPARATOR


def _encode_pair(pair: Pair, max_seq_len: int) -> tuple[list[int], int]:
    """(token ids, answer start index) for one training sequence."""
    prompt_ids = [BOS] + encode(prompt_text(pair.instruction, pair.input))
    answer_ids = encode(pair.output) + [EOS]
    ids = prompt_ids + answer_ids
    if len(ids) > max_seq_len:
        ids = ids[len(ids) - max_seq_len:]
    answer_start = len(ids) - len(answer_ids)
    return ids, max(answer_start, 1)


def _batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def train(
    config_path: str | Path,
    pairs_path: str | Path,
    base_path: str | Path,
    out_path: str | Path,
    seed: int = 0,
) -> list[float]:
    """Train adapters and save the artifact; returns the per-epoch loss log."""
    config: TrainConfig = load_config(config_path)
    pairs = load_pairs(pairs_path)  # raises DatasetEmptyError on empty files
    torch.manual_seed(seed)

    model: TinyLM = load_base(base_path)
    model = apply_lora(model, config.lora_r, config.lora_alpha, config.lora_dropout, config.target_modules)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.learning_rate)

    encoded = [_encode_pair(p, min(config.max_seq_len, model.config.max_len)) for p in pairs]
    loss_log: list[float] = []
    model.train()
    for _epoch in range(config.epochs):
        epoch_losses: list[float] = []
        for batch in _batches(encoded, config.batch_size):
            max_len = max(len(ids) for ids, _ in batch)
            inputs = torch.zeros(len(batch), max_len - 1, dtype=torch.long)
            targets = torch.full((len(batch), max_len - 1), -100, dtype=torch.long)
            pad_mask = torch.zeros(len(batch), max_len - 1, dtype=torch.bool)
            for row, (ids, answer_start) in enumerate(batch):
                seq = torch.tensor(ids, dtype=torch.long)
                inputs[row, : len(ids) - 1] = seq[:-1]
                pad_mask[row, : len(ids) - 1] = True
                # predict tokens from answer_start onward
                targets[row, answer_start - 1 : len(ids) - 1] = seq[answer_start:]
            logits = model(inputs, pad_mask)
            loss = F.cross_entropy(logits.reshape(-1, logits.size(-1)), targets.reshape(-1), ignore_index=-100)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        loss_log.append(sum(epoch_losses) / len(epoch_losses))

    save_adapter(model, {**asdict(config)}, loss_log, out_path)
    return loss_log
