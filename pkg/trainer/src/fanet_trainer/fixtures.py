"""Parity fixtures: saved (input tensor, per-frame output) pairs that let the
inference implementation prove it reproduces this trainer's forward pass."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .container import save_container
from .features import stft_features, to_subbands
from .model import FaNet


def export_parity_fixture(model: FaNet, segments, out_dir) -> tuple[Path, Path]:
    """Write ``model.fanw`` and ``fixture.npz`` for the given dry segments.

    Each segment contributes one input/output pair; pass 0.2 s and 0.4 s
    segments to cover the standard 22- and 47-frame windows.
    """
    segments = list(segments)
    if not segments:
        raise ValueError("parity fixture needs at least one segment")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    container_path = out / "model.fanw"
    save_container(model, container_path)

    arrays = {}
    model.eval()
    for i, segment in enumerate(segments):
        tensor = to_subbands(
            stft_features(torch.as_tensor(np.asarray(segment, dtype=np.float64)))
        )
        arrays[f"input_{i}"] = tensor.numpy()
        arrays[f"output_{i}"] = model.frame_outputs(tensor).numpy()
    fixture_path = out / "fixture.npz"
    np.savez(fixture_path, **arrays)
    return container_path, fixture_path
