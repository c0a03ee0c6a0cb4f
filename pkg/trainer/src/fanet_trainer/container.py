"""Writer/reader for the FANW weight container consumed by the inference
package. Independent implementation of the published byte layout:

    magic "FANW" | version u32 LE | header length u32 LE |
    JSON header {"config", "manifest": [{"name","shape","offset"}]} |
    contiguous float32 LE payload

The manifest enumerates tensors in the canonical order below; batch-norm
running statistics are included (inference needs them), torch bookkeeping
(``num_batches_tracked``) is not.
"""

from __future__ import annotations

import json
import struct

import numpy as np
import torch

from .model import ArchConfig, FaNet

MAGIC = b"FANW"
VERSION = 1


def manifest_names(cfg: ArchConfig) -> list[str]:
    names = [
        "input_proj.conv.weight",
        "input_proj.conv.bias",
        "input_proj.bn.weight",
        "input_proj.bn.bias",
        "input_proj.bn.running_mean",
        "input_proj.bn.running_var",
        "input_proj.prelu.weight",
    ]
    for i in range(cfg.fa_blocks):
        p = f"blocks.{i}"
        names += [
            f"{p}.filter.conv.weight",
            f"{p}.filter.conv.bias",
            f"{p}.filter.bn.weight",
            f"{p}.filter.bn.bias",
            f"{p}.filter.bn.running_mean",
            f"{p}.filter.bn.running_var",
            f"{p}.filter.prelu.weight",
        ]
        for k in range(len(cfg.kernels)):
            names += [f"{p}.filter.dw{k}.weight", f"{p}.filter.dw{k}.bias"]
        names += [f"{p}.filter.fuse.weight", f"{p}.filter.fuse.bias"]
        for part in ("q", "k", "v", "proj"):
            names += [f"{p}.attn.{part}.weight", f"{p}.attn.{part}.bias"]
        names += [f"{p}.norm.weight", f"{p}.norm.bias"]
    names += [
        "gru.weight_ih",
        "gru.weight_hh",
        "gru.bias_ih",
        "gru.bias_hh",
        "head.weight",
        "head.bias",
    ]
    return names


def _state_dict_key(name: str) -> str:
    # torch's GRU appends a layer suffix to its parameter names
    if name.startswith("gru."):
        return name + "_l0"
    return name


def export_container_bytes(model: FaNet) -> bytes:
    state = model.state_dict()
    entries = []
    chunks = []
    offset = 0
    for name in manifest_names(model.cfg):
        tensor = state[_state_dict_key(name)].detach().cpu().to(torch.float32)
        raw = tensor.numpy().astype("<f4").tobytes()
        entries.append(
            {"name": name, "shape": list(tensor.shape), "offset": offset}
        )
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"config": model.cfg.to_dict(), "manifest": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return b"".join([MAGIC, struct.pack("<II", VERSION, len(header)), header, *chunks])


def save_container(model: FaNet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(export_container_bytes(model))


def load_container(path) -> FaNet:
    """Rebuild a trainable model from a container file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"not a FANW container: magic {data[:4]!r}")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    payload = data[12 + header_len :]

    cfg = ArchConfig.from_dict(header["config"])
    model = FaNet(cfg)
    state = model.state_dict()
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        flat = np.frombuffer(payload[start : start + 4 * count], dtype="<f4")
        state[_state_dict_key(entry["name"])] = torch.from_numpy(
            flat.reshape(shape).copy()
        )
    model.load_state_dict(state)
    return model
