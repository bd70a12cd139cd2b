"""Transformer building blocks shared by the encoders and the decoder."""

from __future__ import annotations

import math

import torch
from torch import nn
import torch.nn.functional as F

NEG = -1e9


class Attention(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        if d % heads:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.d, self.h = d, heads
        self.qkv = nn.Linear(d, 3 * d)
        self.out = nn.Linear(d, d)

    def forward(self, x, allowed=None, cache=None):
        """``allowed``: bool [B, 1, Lq, Lk], True where attention is permitted.

        With ``cache=(k, v)`` the new keys/values are appended and the
        updated cache is returned alongside the output.
        """
        b, lq, _ = x.shape
        dh = self.d // self.h
        q, k, v = self.qkv(x).split(self.d, dim=-1)
        q = q.view(b, lq, self.h, dh).transpose(1, 2)
        k = k.view(b, lq, self.h, dh).transpose(1, 2)
        v = v.view(b, lq, self.h, dh).transpose(1, 2)
        if cache is not None:
            k = torch.cat([cache[0], k], dim=2)
            v = torch.cat([cache[1], v], dim=2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(dh)
        if allowed is not None:
            att = att.masked_fill(~allowed, NEG)
        y = F.softmax(att, dim=-1) @ v
        y = self.out(y.transpose(1, 2).reshape(b, lq, self.d))
        return y, (k, v)


class Block(nn.Module):
    """Pre-norm transformer block."""

    def __init__(self, d: int, heads: int, d_ff: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d)
        self.attn = Attention(d, heads)
        self.ln2 = nn.LayerNorm(d)
        self.mlp = nn.Sequential(nn.Linear(d, d_ff), nn.GELU(), nn.Linear(d_ff, d))

    def forward(self, x, allowed=None, cache=None):
        a, new_cache = self.attn(self.ln1(x), allowed, cache)
        x = x + a
        x = x + self.mlp(self.ln2(x))
        return x, new_cache


def init_weights(module: nn.Module, generator: torch.Generator) -> None:
    """Gaussian weights with std 1/sqrt(fan_in), zero biases, unit LayerNorm gains."""
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv1d, nn.Conv2d)):
            with torch.no_grad():
                fan_in = m.weight[0].numel()
                m.weight.normal_(0.0, 1.0 / math.sqrt(fan_in), generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.LayerNorm):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()
