"""STFT input features for the distance network: real/imaginary parts plus
sine/cosine phase encoding, and the subband channel stacking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window


@dataclass
class StftSpec:
    frame_len_samples: int = 512
    hop_samples: int = 128
    fft_size: int = 512
    window: str = "hann"
    freq_bins: int = 256

    def __post_init__(self):
        if self.hop_samples > self.frame_len_samples:
            raise ValueError("hop must not exceed frame length")
        if self.fft_size < self.frame_len_samples:
            raise ValueError("fft_size must cover the frame")
        if self.freq_bins > self.fft_size // 2 + 1:
            raise ValueError("freq_bins exceeds the one-sided spectrum size")

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.frame_len_samples:
            raise ValueError(
                f"segment of {n_samples} samples is shorter than one "
                f"{self.frame_len_samples}-sample frame"
            )
        return 1 + (n_samples - self.frame_len_samples) // self.hop_samples


@dataclass
class FeatureTensor:
    """Network input of shape [4, F, T]; channels are Re, Im, sin, cos."""

    data: np.ndarray
    segment_len: int

    CHANNELS = ("re", "im", "sin", "cos")

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 4:
            raise ValueError("feature tensor must have shape [4, F, T]")

    @property
    def freq_bins(self) -> int:
        return self.data.shape[1]

    @property
    def frame_count(self) -> int:
        return self.data.shape[2]


@dataclass
class SubbandTensor:
    """Subband-stacked features of shape [N*4, F/N, T]."""

    data: np.ndarray
    subband_count: int

    @property
    def frame_count(self) -> int:
        return self.data.shape[2]


def stft_features(segment: np.ndarray, spec: StftSpec | None = None) -> FeatureTensor:
    """Frame a mono segment (no padding, frame 0 starts at sample 0) and build
    the 4-channel spectro-temporal tensor.

    The one-sided spectrum is truncated to ``spec.freq_bins`` rows, so DC is
    kept and the Nyquist bin dropped at the defaults. Zero-magnitude bins take
    phase 0 (sin 0, cos 1).
    """
    spec = spec or StftSpec()
    x = np.asarray(segment, dtype=np.float64).reshape(-1)
    t_frames = spec.frame_count(len(x))

    window = get_window(spec.window, spec.frame_len_samples, fftbins=True)
    starts = np.arange(t_frames) * spec.hop_samples
    frames = x[starts[:, None] + np.arange(spec.frame_len_samples)] * window
    spectrum = np.fft.rfft(frames, n=spec.fft_size, axis=1)[:, : spec.freq_bins].T

    magnitude = np.abs(spectrum)
    phase = np.angle(spectrum)
    sin = np.sin(phase)
    cos = np.cos(phase)
    silent = magnitude == 0.0
    sin[silent] = 0.0
    cos[silent] = 1.0

    data = np.stack([spectrum.real, spectrum.imag, sin, cos]).astype(np.float32)
    return FeatureTensor(data=data, segment_len=len(x))


def to_subbands(features: FeatureTensor, subband_count: int) -> SubbandTensor:
    """Stack ``subband_count`` frequency bands along the channel axis.

    Pure reindexing: channel block ``b`` (4 channels) holds frequency rows
    ``[b*F/N, (b+1)*F/N)`` of the input.
    """
    n = subband_count
    ch, f, t = features.data.shape
    if n <= 0 or f % n != 0:
        raise ValueError(f"subband count {n} does not divide {f} frequency bins")
    rows = f // n
    data = (
        features.data.reshape(ch, n, rows, t)
        .transpose(1, 0, 2, 3)
        .reshape(n * ch, rows, t)
    )
    return SubbandTensor(data=np.ascontiguousarray(data), subband_count=n)


def from_subbands(subbands: SubbandTensor, segment_len: int = 0) -> FeatureTensor:
    """Inverse of :func:`to_subbands`; exact element-for-element."""
    n = subbands.subband_count
    nch, rows, t = subbands.data.shape
    ch = nch // n
    data = (
        subbands.data.reshape(n, ch, rows, t)
        .transpose(1, 0, 2, 3)
        .reshape(ch, n * rows, t)
    )
    return FeatureTensor(data=np.ascontiguousarray(data), segment_len=segment_len)


def dump_tensor(path, array: np.ndarray) -> None:
    """Debug dump: little-endian float32 payload after one JSON header line."""
    import json

    arr = np.ascontiguousarray(array, dtype="<f4")
    header = json.dumps({"shape": list(arr.shape), "dtype": "<f4"}).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes())


def load_tensor(path) -> np.ndarray:
    import json

    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        payload = fh.read()
    return np.frombuffer(payload, dtype="<f4").reshape(header["shape"]).copy()
