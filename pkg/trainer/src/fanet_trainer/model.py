"""Trainable subband Filter-Attention network (PyTorch).

The module tree is named so that ``state_dict()`` keys line up with the
weight-container manifest (the GRU's ``_l0`` suffix is the one exception,
handled at export). Inference-side parity is part of the test suite: loaded
weights must reproduce per-frame outputs within 1e-4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

DEFAULT_KERNELS = ((1, 3), (3, 7), (7, 15))


@dataclass(frozen=True)
class ArchConfig:
    subbands: int = 16
    channels: int = 32
    fa_blocks: int = 4
    attn_heads: int = 4
    attn_channels: int = 4
    gru_hidden: int = 32
    freq_bins: int = 256
    kernels: tuple = DEFAULT_KERNELS

    @property
    def in_channels(self) -> int:
        return 4 * self.subbands

    @property
    def band_bins(self) -> int:
        return self.freq_bins // self.subbands

    def to_dict(self) -> dict:
        return {
            "subbands": self.subbands,
            "channels": self.channels,
            "fa_blocks": self.fa_blocks,
            "attn_heads": self.attn_heads,
            "attn_channels": self.attn_channels,
            "gru_hidden": self.gru_hidden,
            "freq_bins": self.freq_bins,
            "kernels": [list(k) for k in self.kernels],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArchConfig":
        kwargs = dict(data)
        kwargs["kernels"] = tuple(tuple(k) for k in kwargs.get("kernels", DEFAULT_KERNELS))
        return cls(**kwargs)


class ChannelNorm(nn.Module):
    """Normalize across channels independently at every (freq, time) cell."""

    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):  # (B, C, F, T)
        mean = x.mean(dim=1, keepdim=True)
        var = x.var(dim=1, keepdim=True, unbiased=False)
        y = (x - mean) / torch.sqrt(var + self.eps)
        return y * self.weight.view(1, -1, 1, 1) + self.bias.view(1, -1, 1, 1)


class InputProjection(nn.Module):
    def __init__(self, cfg: ArchConfig):
        super().__init__()
        self.conv = nn.Conv2d(cfg.in_channels, cfg.channels, 1)
        self.bn = nn.BatchNorm2d(cfg.channels)
        self.prelu = nn.PReLU()

    def forward(self, x):
        return self.prelu(self.bn(self.conv(x)))


class FilterProcess(nn.Module):
    """Multi-scale depth-wise filtering fused back to one channel per group."""

    def __init__(self, cfg: ArchConfig):
        super().__init__()
        c = cfg.channels
        self.conv = nn.Conv2d(c, c, 1)
        self.bn = nn.BatchNorm2d(c)
        self.prelu = nn.PReLU()
        for i, (kh, kw) in enumerate(cfg.kernels):
            self.add_module(
                f"dw{i}",
                nn.Conv2d(c, c, (kh, kw), padding=(kh // 2, kw // 2), groups=c),
            )
        self.n_scales = len(cfg.kernels)
        self.fuse = nn.Conv2d(self.n_scales * c, c, 1, groups=c)

    def forward(self, x):
        y = self.prelu(self.bn(self.conv(x)))
        scales = [getattr(self, f"dw{i}")(y) for i in range(self.n_scales)]
        stacked = torch.stack(scales, dim=2)  # (B, C, S, F, T): group-major
        b, c, s, f, t = stacked.shape
        return self.fuse(stacked.reshape(b, c * s, f, t))


class TemporalSelfAttention(nn.Module):
    """Multi-head attention over frames; head features are the flattened
    (attention channels x band bins) rows."""

    def __init__(self, cfg: ArchConfig):
        super().__init__()
        c = cfg.channels
        qk = cfg.attn_heads * cfg.attn_channels
        self.heads = cfg.attn_heads
        self.q = nn.Conv2d(c, qk, 1)
        self.k = nn.Conv2d(c, qk, 1)
        self.v = nn.Conv2d(c, c, 1)
        self.proj = nn.Conv2d(c, c, 1)

    def forward(self, x):
        b, c, f, t = x.shape
        q = self.q(x).reshape(b, self.heads, -1, t)
        k = self.k(x).reshape(b, self.heads, -1, t)
        v = self.v(x).reshape(b, self.heads, -1, t)
        scale = 1.0 / math.sqrt(q.shape[2])
        scores = torch.einsum("bhdt,bhds->bhts", q, k) * scale
        attn = torch.softmax(scores, dim=-1)
        context = torch.einsum("bhts,bhds->bhdt", attn, v)
        return self.proj(context.reshape(b, c, f, t))


class FaBlock(nn.Module):
    def __init__(self, cfg: ArchConfig):
        super().__init__()
        self.filter = FilterProcess(cfg)
        self.attn = TemporalSelfAttention(cfg)
        self.norm = ChannelNorm(cfg.channels)

    def forward(self, x):
        x = x + self.filter(x)
        x = x + self.attn(x)
        return self.norm(x)


class FaNet(nn.Module):
    def __init__(self, cfg: ArchConfig | None = None):
        super().__init__()
        self.cfg = cfg or ArchConfig()
        self.input_proj = InputProjection(self.cfg)
        self.blocks = nn.ModuleList(FaBlock(self.cfg) for _ in range(self.cfg.fa_blocks))
        self.gru = nn.GRU(self.cfg.channels, self.cfg.gru_hidden)
        self.head = nn.Linear(self.cfg.gru_hidden, 1)

    def forward(self, x):  # (B, 4N, F/N, T) -> (B, T)
        y = self.input_proj(x)
        for block in self.blocks:
            y = block(y)
        per_frame = y.mean(dim=2)  # (B, C, T)
        seq, _ = self.gru(per_frame.permute(2, 0, 1))  # (T, B, H)
        frames = self.head(seq).squeeze(-1).permute(1, 0)  # (B, T)
        return torch.relu(frames)

    def frame_outputs(self, subband_tensor: torch.Tensor) -> torch.Tensor:
        """Single-sample convenience: [4N, F/N, T] -> [T]."""
        self.eval()
        with torch.no_grad():
            return self.forward(subband_tensor.unsqueeze(0))[0]
