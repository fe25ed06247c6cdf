"""Byte-level causal LM with LoRA adapters.

The base checkpoint is a small randomly initialized transformer created by
`ftdriver init-base` and kept frozen; training touches only the injected
low-rank matrices (scale alpha/r, dropout on the adapter input). The
adapter artifact embeds the base weights so inference needs a single file.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

BOS, EOS = 256, 257
VOCAB = 258


@dataclass(frozen=True)
class BaseConfig:
    d_model: int = 96
    n_layers: int = 2
    n_heads: int = 4
    max_len: int = 2048
    seed: int = 0


class LoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, r: int, alpha: int, dropout: float):
        super().__init__()
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.lora_a = nn.Parameter(torch.randn(r, base.in_features) * 0.01)
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, r))
        self.scale = alpha / r
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.drop(x) @ self.lora_a.T @ self.lora_b.T * self.scale


class Block(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d)
        self.ln2 = nn.LayerNorm(d)
        self.q = nn.Linear(d, d)
        self.k = nn.Linear(d, d)
        self.v = nn.Linear(d, d)
        self.o = nn.Linear(d, d)
        self.up = nn.Linear(d, 4 * d)
        self.down = nn.Linear(4 * d, d)
        self.heads = heads

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        b, l, d = x.shape
        h = self.ln1(x)
        q = self.q(h).view(b, l, self.heads, -1).transpose(1, 2)
        k = self.k(h).view(b, l, self.heads, -1).transpose(1, 2)
        v = self.v(h).view(b, l, self.heads, -1).transpose(1, 2)
        if pad_mask is None:
            att = F.scaled_dot_product_attention(q, k, v, is_causal=True)
        else:
            causal = torch.ones(l, l, dtype=torch.bool).tril()
            mask = causal.unsqueeze(0) & pad_mask[:, None, :]
            att = F.scaled_dot_product_attention(q, k, v, attn_mask=mask.unsqueeze(1))
        x = x + self.o(att.transpose(1, 2).reshape(b, l, d))
        x = x + self.down(F.gelu(self.up(self.ln2(x))))
        return x


class TinyLM(nn.Module):
    def __init__(self, config: BaseConfig):
        super().__init__()
        self.config = config
        self.emb = nn.Embedding(VOCAB, config.d_model)
        self.pos = nn.Embedding(config.max_len, config.d_model)
        self.blocks = nn.ModuleList(Block(config.d_model, config.n_heads) for _ in range(config.n_layers))
        self.ln = nn.LayerNorm(config.d_model)
        self.head = nn.Linear(config.d_model, VOCAB)

    def forward(self, idx: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        b, l = idx.shape
        x = self.emb(idx) + self.pos(torch.arange(l, device=idx.device))
        for block in self.blocks:
            x = block(x, pad_mask)
        return self.head(self.ln(x))


def encode(text: str) -> list[int]:
    return [min(byte, 255) for byte in text.encode("utf-8")]


def decode(ids: list[int]) -> str:
    return bytes(i for i in ids if i < 256).decode("utf-8", errors="replace")


def apply_lora(model: TinyLM, r: int, alpha: int, dropout: float, target_modules: str) -> TinyLM:
    attention_names = ("q", "k", "v", "o")
    mlp_names = ("up", "down")
    names = attention_names if target_modules == "attention" else attention_names + mlp_names
    for block in model.blocks:
        for name in names:
            setattr(block, name, LoRALinear(getattr(block, name), r, alpha, dropout))
    if target_modules == "all":
        model.head = LoRALinear(model.head, r, alpha, dropout)
    for name, param in model.named_parameters():
        if "lora" not in name:
            param.requires_grad_(False)
    return model


def init_base(config: BaseConfig, path: str | Path) -> None:
    torch.manual_seed(config.seed)
    model = TinyLM(config)
    torch.save({"base_config": asdict(config), "base_state": model.state_dict()}, path)


def load_base(path: str | Path) -> TinyLM:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = BaseConfig(**payload["base_config"])
    model = TinyLM(config)
    model.load_state_dict(payload["base_state"])
    return model


class AdapterLoadError(Exception):
    pass


def save_adapter(model: TinyLM, ft_config: dict, loss_log: list[float], path: str | Path) -> None:
    adapter_state = {k: v for k, v in model.state_dict().items() if "lora" in k}
    base_state = {k: v for k, v in model.state_dict().items() if "lora" not in k}
    torch.save({
        "base_config": asdict(model.config),
        "base_state": base_state,
        "adapter_state": adapter_state,
        "ft_config": ft_config,
        "loss_log": loss_log,
    }, path)


def load_adapter(path: str | Path) -> tuple[TinyLM, dict, list[float]]:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
        config = BaseConfig(**payload["base_config"])
        ft = payload["ft_config"]
        model = TinyLM(config)
        model = apply_lora(
            model,
            r=int(ft["lora_r"]),
            alpha=int(ft["lora_alpha"]),
            dropout=float(ft["lora_dropout"]),
            target_modules=ft.get("target_modules", "attention"),
        )
        state = dict(payload["base_state"])
        state.update(payload["adapter_state"])
        # base linears now live under .base inside the LoRA wrappers
        remapped = {}
        model_keys = set(model.state_dict().keys())
        for key, value in state.items():
            if key in model_keys:
                remapped[key] = value
                continue
            parts = key.rsplit(".", 1)
            candidate = f"{parts[0]}.base.{parts[1]}"
            if candidate in model_keys:
                remapped[candidate] = value
            else:
                raise AdapterLoadError(f"unexpected weight {key!r} in adapter file")
        model.load_state_dict(remapped)
        model.eval()
        return model, ft, list(payload["loss_log"])
    except AdapterLoadError:
        raise
    except Exception as exc:
        raise AdapterLoadError(f"cannot load adapter from {path}: {exc}") from exc


@torch.no_grad()
def greedy_generate(model: TinyLM, prompt_ids: list[int], max_new_tokens: int = 32) -> list[int]:
    ids = list(prompt_ids)
    max_len = model.config.max_len
    for _ in range(max_new_tokens):
        window = ids[-max_len:]
        logits = model(torch.tensor([window]))
        nxt = int(logits[0, -1].argmax())
        if nxt == EOS:
            break
        ids.append(nxt)
    return ids[len(prompt_ids):]
