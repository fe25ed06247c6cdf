"""Inference over a corpus manifest, emitting harness-compatible records."""
from __future__ import annotations

import time
from pathlib import Path

from .formats import Prediction, load_corpus, load_taxonomy, map_output_to_label, write_predictions
from .model import BOS, decode, encode, greedy_generate, load_adapter
from .train import prompt_text

QUERY_TEMPLATE = (
    "Can you check if the following smart contract written in {language} "
    "contains a vulnerability? --[Source Code]--"
)
LANGUAGE_NAMES = {"algorand": "PyTeal", "solana": "Rust"}


def predict(
    adapter_path: str | Path,
    manifest_path: str | Path,
    taxonomy_path: str | Path,
    out_path: str | Path,
    repetitions: int = 3,
    mode: str = "ft",
    max_new_tokens: int = 32,
) -> list[Prediction]:
    model, _ft_config, _loss_log = load_adapter(adapter_path)
    samples = load_corpus(manifest_path)
    entries = load_taxonomy(taxonomy_path)

    records: list[Prediction] = []
    for sample in sorted(samples, key=lambda s: s.id):
        instruction = QUERY_TEMPLATE.format(language=LANGUAGE_NAMES.get(sample.platform, "Rust"))
        prompt_ids = [BOS] + encode(prompt_text_from(instruction, sample.source, model.config.max_len))
        for run in range(1, repetitions + 1):
            started = time.monotonic()
            generated = greedy_generate(model, prompt_ids, max_new_tokens=max_new_tokens)
            latency_ms = int((time.monotonic() - started) * 1000)
            raw = decode(generated).strip()
            parsed = map_output_to_label(raw, sample.platform, entries)
            records.append(Prediction(
                sample_id=sample.id,
                run_index=run,
                mode=mode,
                parsed_category=parsed,
                latency_ms=latency_ms,
                raw_response=raw,
            ))
    write_predictions(records, out_path)
    return records


def prompt_text_from(instruction: str, source: str, max_len: int) -> str:
    text = prompt_text(instruction, source)
    # keep the tail: the answer separator must stay within the window
    max_chars = max_len - 64
    return text[-max_chars:] if len(text) > max_chars else text
