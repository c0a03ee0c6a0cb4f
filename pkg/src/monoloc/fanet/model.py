"""Forward pass of the Filter-Attention distance network.

The model is a plain dict of float32 numpy tensors evaluated functionally;
building it from a container or a seed never mutates shared state, so forward
calls are reentrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..features import SubbandTensor
from .config import FaNetConfig, count_parameters, manifest

_EPS = 1e-5  # batch-norm and channel-norm epsilon


@dataclass
class FrameOutputs:
    """Per-frame distance estimates in meters; never negative (final ReLU)."""

    values: np.ndarray

    @property
    def frame_count(self) -> int:
        return len(self.values)

    def mean_distance_m(self) -> float:
        return float(np.mean(self.values))


@dataclass
class ForwardProbe:
    """Instrumentation for invariant checks on a forward pass."""

    bypass_channel_norm: bool = False
    attention_rows: list = field(default_factory=list)


@dataclass(frozen=True)
class Model:
    config: FaNetConfig
    params: dict

    def forward(self, x: SubbandTensor, probe: ForwardProbe | None = None) -> FrameOutputs:
        return forward(self, x, probe)


class WeightShapeError(ValueError):
    """Weight tensors incompatible with the requested configuration."""


def build(
    config: FaNetConfig,
    weights=None,
    seed: int | None = None,
) -> Model:
    """Materialize a model from a WeightContainer or a deterministic seed."""
    if (weights is None) == (seed is None):
        raise ValueError("provide exactly one of weights or seed")
    if weights is not None:
        params = _params_from_container(config, weights)
    else:
        params = _random_params(config, seed)
    return Model(config=config, params=params)


def _params_from_container(config: FaNetConfig, container) -> dict:
    expected = manifest(config)
    problems = []
    params = {}
    for name, shape in expected:
        tensor = container.tensors.get(name)
        if tensor is None:
            problems.append(f"missing tensor '{name}' (expected shape {shape})")
            continue
        if tuple(tensor.shape) != shape:
            problems.append(
                f"tensor '{name}': expected shape {shape}, got {tuple(tensor.shape)}"
            )
            continue
        params[name] = np.ascontiguousarray(tensor, dtype=np.float32)
    extra = set(container.tensors) - {name for name, _ in expected}
    problems.extend(f"unexpected tensor '{name}'" for name in sorted(extra))
    if problems:
        raise WeightShapeError(
            "weights incompatible with config:\n  " + "\n  ".join(problems)
        )
    return params


def _random_params(config: FaNetConfig, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in manifest(config):
        if name.endswith("prelu.weight"):
            value = np.full(shape, 0.25)
        elif ".bn." in name or ".norm." in name:
            ones = name.endswith(("weight", "running_var"))
            value = np.ones(shape) if ones else np.zeros(shape)
        elif name.startswith("gru.") or name.startswith("head."):
            bound = 1.0 / math.sqrt(config.gru_hidden)
            value = rng.uniform(-bound, bound, shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else _conv_fan_in(name, params)
            bound = 1.0 / math.sqrt(fan_in)
            value = rng.uniform(-bound, bound, shape)
        params[name] = value.astype(np.float32)
    return params


def _conv_fan_in(bias_name: str, params: dict) -> int:
    weight = params[bias_name.rsplit(".", 1)[0] + ".weight"]
    return int(np.prod(weight.shape[1:]))


def forward(model: Model, x: SubbandTensor, probe: ForwardProbe | None = None) -> FrameOutputs:
    cfg = model.config
    data = np.asarray(x.data, dtype=np.float32)
    expected = (cfg.in_channels, cfg.band_bins)
    if data.ndim != 3 or data.shape[:2] != expected:
        raise ValueError(
            f"input shape {data.shape} does not match config "
            f"[{expected[0]}, {expected[1]}, T]"
        )
    p = model.params

    y = _conv1x1(data, p["input_proj.conv.weight"], p["input_proj.conv.bias"])
    y = _batchnorm(y, p, "input_proj.bn")
    y = _prelu(y, p["input_proj.prelu.weight"])

    for i in range(cfg.fa_blocks):
        y = _fa_block(y, p, f"blocks.{i}", cfg, probe)

    per_frame = y.mean(axis=1)  # aggregate frequency rows -> [C, T]
    hidden = _gru(per_frame.T, p)
    frames = hidden @ p["head.weight"].T + p["head.bias"]
    frames = np.maximum(frames[:, 0], np.float32(0.0))
    return FrameOutputs(values=frames)


def _fa_block(x, p, prefix, cfg, probe):
    y = _conv1x1(x, p[f"{prefix}.filter.conv.weight"], p[f"{prefix}.filter.conv.bias"])
    y = _batchnorm(y, p, f"{prefix}.filter.bn")
    y = _prelu(y, p[f"{prefix}.filter.prelu.weight"])
    scales = [
        _depthwise(y, p[f"{prefix}.filter.dw{k}.weight"], p[f"{prefix}.filter.dw{k}.bias"])
        for k in range(len(cfg.kernels))
    ]
    stacked = np.stack(scales, axis=1)  # [C, scales, F', T]
    fuse_w = p[f"{prefix}.filter.fuse.weight"][:, :, 0, 0]
    fused = np.einsum("cs,csft->cft", fuse_w, stacked)
    fused += p[f"{prefix}.filter.fuse.bias"][:, None, None]
    x = x + fused

    x = x + _attention(x, p, prefix, cfg, probe)
    if probe is None or not probe.bypass_channel_norm:
        x = _channel_norm(x, p[f"{prefix}.norm.weight"], p[f"{prefix}.norm.bias"])
    return x


def _attention(x, p, prefix, cfg, probe):
    c, fb, t = x.shape
    nh = cfg.attn_heads
    q = _conv1x1(x, p[f"{prefix}.attn.q.weight"], p[f"{prefix}.attn.q.bias"])
    k = _conv1x1(x, p[f"{prefix}.attn.k.weight"], p[f"{prefix}.attn.k.bias"])
    v = _conv1x1(x, p[f"{prefix}.attn.v.weight"], p[f"{prefix}.attn.v.bias"])

    dq = cfg.attn_channels * fb
    dv = (c // nh) * fb
    q = q.reshape(nh, dq, t)
    k = k.reshape(nh, dq, t)
    v = v.reshape(nh, dv, t)
    scale = np.float32(1.0 / math.sqrt(dq))

    heads = []
    for h in range(nh):
        scores = (q[h].T @ k[h]) * scale  # [T, T], rows index query frames
        rows = _softmax_rows(scores)
        if probe is not None:
            probe.attention_rows.append(rows)
        heads.append((rows @ v[h].T).T)  # [dv, T]
    out = np.concatenate(heads, axis=0).reshape(c, fb, t)
    return _conv1x1(out, p[f"{prefix}.attn.proj.weight"], p[f"{prefix}.attn.proj.bias"])


def _conv1x1(x, weight, bias):
    out = np.tensordot(weight[:, :, 0, 0], x, axes=1)
    return out + bias[:, None, None]


def _depthwise(x, weight, bias):
    c, f, t = x.shape
    kh, kw = weight.shape[2], weight.shape[3]
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    out = np.zeros_like(x)
    for i in range(kh):
        for j in range(kw):
            out += weight[:, 0, i, j][:, None, None] * padded[:, i : i + f, j : j + t]
    return out + bias[:, None, None]


def _batchnorm(x, p, prefix):
    scale = p[f"{prefix}.weight"] / np.sqrt(p[f"{prefix}.running_var"] + np.float32(_EPS))
    shift = p[f"{prefix}.bias"] - p[f"{prefix}.running_mean"] * scale
    return x * scale[:, None, None] + shift[:, None, None]


def _prelu(x, alpha):
    return np.where(x >= 0, x, alpha[0] * x)


def _channel_norm(x, weight, bias):
    mean = x.mean(axis=0, keepdims=True)
    var = x.var(axis=0, keepdims=True)
    y = (x - mean) / np.sqrt(var + np.float32(_EPS))
    return y * weight[:, None, None] + bias[:, None, None]


def _softmax_rows(scores):
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _gru(inputs, p):
    w_ih, w_hh = p["gru.weight_ih"], p["gru.weight_hh"]
    b_ih, b_hh = p["gru.bias_ih"], p["gru.bias_hh"]
    hidden = w_hh.shape[1]
    t_frames = inputs.shape[0]
    h = np.zeros(hidden, dtype=np.float32)
    out = np.empty((t_frames, hidden), dtype=np.float32)
    for t in range(t_frames):
        gx = w_ih @ inputs[t] + b_ih
        gh = w_hh @ h + b_hh
        r = _sigmoid(gx[:hidden] + gh[:hidden])
        z = _sigmoid(gx[hidden : 2 * hidden] + gh[hidden : 2 * hidden])
        n = np.tanh(gx[2 * hidden :] + r * gh[2 * hidden :])
        h = (1.0 - z) * n + z * h
        out[t] = h
    return out


def _sigmoid(x):
    return np.float32(1.0) / (np.float32(1.0) + np.exp(-x))
