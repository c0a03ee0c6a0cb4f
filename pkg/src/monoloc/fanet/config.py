"""Architecture hyperparameters, the canonical tensor manifest, and analytic
parameter / MAC accounting for the subband Filter-Attention network."""

from __future__ import annotations

from dataclasses import dataclass, field

DEFAULT_KERNELS = ((1, 3), (3, 7), (7, 15))


@dataclass(frozen=True)
class FaNetConfig:
    subbands: int = 16
    channels: int = 32
    fa_blocks: int = 4
    attn_heads: int = 4
    attn_channels: int = 4
    gru_hidden: int = 32
    freq_bins: int = 256
    kernels: tuple = DEFAULT_KERNELS

    def __post_init__(self):
        for name in (
            "subbands",
            "channels",
            "fa_blocks",
            "attn_heads",
            "attn_channels",
            "gru_hidden",
            "freq_bins",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.channels % self.attn_heads != 0:
            raise ValueError("channels must be divisible by attn_heads")
        if self.freq_bins % self.subbands != 0:
            raise ValueError("subbands must divide freq_bins")
        object.__setattr__(self, "kernels", tuple(tuple(k) for k in self.kernels))

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
    def from_dict(cls, data: dict) -> "FaNetConfig":
        kwargs = dict(data)
        if "kernels" in kwargs:
            kwargs["kernels"] = tuple(tuple(k) for k in kwargs["kernels"])
        return cls(**kwargs)


def _conv_entries(prefix: str, out_ch: int, in_ch: int, kh: int = 1, kw: int = 1):
    return [
        (f"{prefix}.weight", (out_ch, in_ch, kh, kw)),
        (f"{prefix}.bias", (out_ch,)),
    ]


def _bn_entries(prefix: str, ch: int):
    return [
        (f"{prefix}.weight", (ch,)),
        (f"{prefix}.bias", (ch,)),
        (f"{prefix}.running_mean", (ch,)),
        (f"{prefix}.running_var", (ch,)),
    ]


def manifest(config: FaNetConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) list of every tensor a model stores.

    Batch-norm running statistics are part of the manifest: inference needs
    them, so the container carries them and the counts below include them.
    """
    c = config.channels
    entries = []
    entries += _conv_entries("input_proj.conv", c, config.in_channels)
    entries += _bn_entries("input_proj.bn", c)
    entries.append(("input_proj.prelu.weight", (1,)))
    for i in range(config.fa_blocks):
        p = f"blocks.{i}"
        entries += _conv_entries(f"{p}.filter.conv", c, c)
        entries += _bn_entries(f"{p}.filter.bn", c)
        entries.append((f"{p}.filter.prelu.weight", (1,)))
        for k, (kh, kw) in enumerate(config.kernels):
            entries += _conv_entries(f"{p}.filter.dw{k}", c, 1, kh, kw)
        entries += _conv_entries(f"{p}.filter.fuse", c, len(config.kernels))
        qk = config.attn_heads * config.attn_channels
        entries += _conv_entries(f"{p}.attn.q", qk, c)
        entries += _conv_entries(f"{p}.attn.k", qk, c)
        entries += _conv_entries(f"{p}.attn.v", c, c)
        entries += _conv_entries(f"{p}.attn.proj", c, c)
        entries.append((f"{p}.norm.weight", (c,)))
        entries.append((f"{p}.norm.bias", (c,)))
    h = config.gru_hidden
    entries.append(("gru.weight_ih", (3 * h, c)))
    entries.append(("gru.weight_hh", (3 * h, h)))
    entries.append(("gru.bias_ih", (3 * h,)))
    entries.append(("gru.bias_hh", (3 * h,)))
    entries.append(("head.weight", (1, h)))
    entries.append(("head.bias", (1,)))
    return entries


def _num_elements(shape: tuple[int, ...]) -> int:
    n = 1
    for s in shape:
        n *= s
    return n


def count_parameters(config: FaNetConfig) -> int:
    """Total stored tensor elements (weights plus batch-norm statistics)."""
    return sum(_num_elements(shape) for _, shape in manifest(config))


def count_trainable_parameters(config: FaNetConfig) -> int:
    """Learnable parameters only, excluding batch-norm running statistics."""
    return sum(
        _num_elements(shape)
        for name, shape in manifest(config)
        if "running_" not in name
    )


def count_macs(config: FaNetConfig, frame_count: int) -> int:
    """Multiply-accumulate count of one forward pass over ``frame_count``
    frames. Convolutions, attention matmuls, the GRU, and the output head are
    counted; pointwise activations and normalizations are not."""
    if frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    c = config.channels
    fb = config.band_bins
    t = frame_count
    grid = fb * t

    total = c * grid * config.in_channels  # input 1x1 conv
    per_head_v = (c // config.attn_heads) * fb
    per_head_qk = config.attn_channels * fb
    for _ in range(config.fa_blocks):
        total += c * grid * c  # filter 1x1
        for kh, kw in config.kernels:
            total += c * grid * kh * kw  # depth-wise convs
        total += c * grid * len(config.kernels)  # fusion across scales
        qk = config.attn_heads * config.attn_channels
        total += 2 * qk * grid * c  # Q and K projections
        total += c * grid * c  # V projection
        total += config.attn_heads * t * t * per_head_qk  # scores
        total += config.attn_heads * t * t * per_head_v  # context
        total += c * grid * c  # output projection
    h = config.gru_hidden
    total += t * 3 * (c * h + h * h)  # GRU gates
    total += t * h  # output head
    return total
