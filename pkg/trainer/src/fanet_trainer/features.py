"""Input features for training, reimplemented in torch.

The contract with the inference side is numerical, not shared code: on the
same segment these features must match its tensors within 1e-5. Framing
starts at sample 0 with no padding, a periodic Hann window, 512-point FFT
with the Nyquist bin dropped, and phase encoded as sin/cos (0 phase for
zero-magnitude bins).
"""

from __future__ import annotations

import torch

FRAME_LEN = 512
HOP = 128
FREQ_BINS = 256


def frame_count(n_samples: int) -> int:
    if n_samples < FRAME_LEN:
        raise ValueError(f"segment of {n_samples} samples is shorter than one frame")
    return 1 + (n_samples - FRAME_LEN) // HOP


def stft_features(segment: torch.Tensor) -> torch.Tensor:
    """[L] float segment -> [4, 256, T] float32 (Re, Im, sin, cos)."""
    x = segment.to(torch.float64).reshape(-1)
    frame_count(x.numel())
    window = torch.hann_window(FRAME_LEN, periodic=True, dtype=torch.float64)
    spectrum = torch.stft(
        x,
        n_fft=FRAME_LEN,
        hop_length=HOP,
        win_length=FRAME_LEN,
        window=window,
        center=False,
        return_complex=True,
    )[:FREQ_BINS]

    re, im = spectrum.real, spectrum.imag
    magnitude = torch.abs(spectrum)
    phase = torch.angle(spectrum)
    sin, cos = torch.sin(phase), torch.cos(phase)
    silent = magnitude == 0.0
    sin = torch.where(silent, torch.zeros_like(sin), sin)
    cos = torch.where(silent, torch.ones_like(cos), cos)
    return torch.stack([re, im, sin, cos]).to(torch.float32)


def to_subbands(features: torch.Tensor, subbands: int = 16) -> torch.Tensor:
    """[4, F, T] -> [4N, F/N, T]; band b occupies channel block [4b, 4b+4)."""
    ch, f, t = features.shape
    if f % subbands != 0:
        raise ValueError(f"{subbands} subbands do not divide {f} bins")
    rows = f // subbands
    return (
        features.reshape(ch, subbands, rows, t)
        .permute(1, 0, 2, 3)
        .reshape(subbands * ch, rows, t)
        .contiguous()
    )
