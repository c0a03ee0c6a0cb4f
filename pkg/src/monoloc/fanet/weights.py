"""Binary weight container.

Layout, all little-endian:

    bytes 0..4    magic ``b"FANW"``
    bytes 4..8    format version, u32
    bytes 8..12   header length in bytes, u32
    header        UTF-8 JSON: {"config": {...}, "manifest": [
                      {"name": str, "shape": [int...], "offset": int}, ...]}
    payload       float32 tensors, contiguous row-major, at the manifest
                  offsets (relative to the start of the payload)

The manifest order is the canonical order of :func:`monoloc.fanet.config.manifest`,
which makes serialization byte-exact and reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import FaNetConfig, count_parameters, manifest

MAGIC = b"FANW"
FORMAT_VERSION = 1


class ContainerError(ValueError):
    """Base class for malformed weight containers."""


class CorruptHeaderError(ContainerError):
    pass


class VersionMismatchError(ContainerError):
    pass


class TruncatedPayloadError(ContainerError):
    pass


@dataclass
class WeightContainer:
    config: FaNetConfig
    tensors: dict
    version: int = FORMAT_VERSION

    def __post_init__(self):
        self.tensors = {
            name: np.ascontiguousarray(value, dtype=np.float32)
            for name, value in self.tensors.items()
        }

    def total_elements(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())

    def to_bytes(self) -> bytes:
        entries = []
        chunks = []
        offset = 0
        for name, shape in manifest(self.config):
            tensor = self.tensors[name]
            entries.append({"name": name, "shape": list(shape), "offset": offset})
            raw = tensor.astype("<f4").tobytes()
            chunks.append(raw)
            offset += len(raw)
        header = json.dumps(
            {"config": self.config.to_dict(), "manifest": entries},
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        return b"".join(
            [MAGIC, struct.pack("<II", self.version, len(header)), header, *chunks]
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())


def save_weights(model) -> WeightContainer:
    """Snapshot a built model into a container (copies every tensor)."""
    tensors = {name: model.params[name].copy() for name, _ in manifest(model.config)}
    return WeightContainer(config=model.config, tensors=tensors)


def load_weights(data: bytes) -> WeightContainer:
    """Parse container bytes, validating structure, shapes, and totals."""
    if len(data) < 12:
        raise CorruptHeaderError("container shorter than the fixed header")
    if data[:4] != MAGIC:
        raise CorruptHeaderError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"container version {version}, this reader supports {FORMAT_VERSION}"
        )
    if len(data) < 12 + header_len:
        raise CorruptHeaderError("header extends past the end of the data")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
        config = FaNetConfig.from_dict(header["config"])
        entries = header["manifest"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptHeaderError(f"unparseable header: {exc}") from None

    expected = manifest(config)
    declared = [(e["name"], tuple(e["shape"])) for e in entries]
    if declared != expected:
        problems = _describe_manifest_mismatch(declared, expected)
        raise CorruptHeaderError("manifest mismatch:\n  " + "\n  ".join(problems))

    payload = data[12 + header_len :]
    tensors = {}
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        stop = start + 4 * count
        if stop > len(payload):
            raise TruncatedPayloadError(
                f"payload truncated: tensor '{entry['name']}' needs bytes "
                f"[{start}, {stop}) but payload has {len(payload)}"
            )
        flat = np.frombuffer(payload[start:stop], dtype="<f4")
        tensors[entry["name"]] = flat.reshape(shape).copy()

    container = WeightContainer(config=config, tensors=tensors, version=version)
    expected_total = count_parameters(config)
    if container.total_elements() != expected_total:
        raise ContainerError(
            f"container holds {container.total_elements()} elements, config "
            f"requires exactly {expected_total}"
        )
    return container


def load_weights_file(path) -> WeightContainer:
    with open(path, "rb") as fh:
        return load_weights(fh.read())


def _describe_manifest_mismatch(declared, expected):
    problems = []
    declared_map = dict(declared)
    expected_map = dict(expected)
    for name, shape in expected:
        if name not in declared_map:
            problems.append(f"missing tensor '{name}' (expected shape {shape})")
        elif declared_map[name] != shape:
            problems.append(
                f"tensor '{name}': expected shape {shape}, got {declared_map[name]}"
            )
    for name, _ in declared:
        if name not in expected_map:
            problems.append(f"unexpected tensor '{name}'")
    if not problems:
        problems.append("tensor order differs from the canonical manifest")
    return problems
