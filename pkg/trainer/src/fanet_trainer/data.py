"""Simulated dataset synthesis: rooms, microphone/source layouts, reverberant
chirp segments, and exact distance labels."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .acoustics import SAMPLE_RATE, Room, chirp, image_source_rir, sample_position, sample_room
from .features import stft_features, to_subbands

MIN_SRC_MIC_DIST = 0.3
WARMUP_S = 0.6  # discard the onset before cropping training segments
CROP_LENGTHS_S = (0.2, 0.4, 0.6, 0.8)


@dataclass
class DatasetSpec:
    n_rooms: int = 1
    rt60_range_s: tuple = (0.6, 0.6)
    mics_per_room: int = 30
    sources_per_mic: int = 10
    split: tuple = (0.8, 0.05, 0.15)
    room_split_mode: str = "pooled"
    seed: int = 0
    max_order: int = 20
    crop_lengths_s: tuple = CROP_LENGTHS_S

    def __post_init__(self):
        if self.n_rooms <= 0 or self.mics_per_room <= 0 or self.sources_per_mic <= 0:
            raise ValueError("room/mic/source counts must be positive")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.room_split_mode not in ("pooled", "held-out-rooms"):
            raise ValueError(f"unknown room_split_mode '{self.room_split_mode}'")

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        kwargs = dict(data)
        for key in ("rt60_range_s", "split", "crop_lengths_s"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class Sample:
    features: torch.Tensor  # [4N, F/N, T] float32
    distance_m: float
    room_id: int
    frame_count: int
    src: np.ndarray | None = None
    mic: np.ndarray | None = None
    wet_pool: np.ndarray | None = None  # steady-state audio for re-cropping
    crop_samples: int = 0

    def recrop(self, rng) -> torch.Tensor:
        """Fresh features from a random crop of the stored steady audio."""
        if self.wet_pool is None:
            return self.features
        start = int(rng.integers(0, len(self.wet_pool) - self.crop_samples + 1))
        segment = self.wet_pool[start : start + self.crop_samples]
        return to_subbands(stft_features(torch.from_numpy(segment)))


@dataclass
class LabeledDataset:
    train: list
    val: list
    test: list
    spec: DatasetSpec

    def __len__(self):
        return len(self.train) + len(self.val) + len(self.test)


def _fft_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(a) + len(b) - 1
    size = 1 << (n - 1).bit_length()
    out = np.fft.irfft(np.fft.rfft(a, size) * np.fft.rfft(b, size), size)
    return out[:n]


def _render_pool(rng, room: Room, src, mic, max_order, crop_lengths) -> tuple:
    """Steady-state wet audio pool plus one crop length drawn for the sample."""
    rir = image_source_rir(room, src, mic, max_order=max_order)
    length_s = float(rng.choice(crop_lengths))
    pool_s = length_s + 0.3  # one period of slack on either side of the crop
    dry = chirp(WARMUP_S + pool_s)
    wet = _fft_convolve(dry, rir)
    start = int(WARMUP_S * SAMPLE_RATE)
    pool = wet[start : start + int(round(pool_s * SAMPLE_RATE))]
    return pool, int(round(length_s * SAMPLE_RATE))


def _draw_geometry(rng, room: Room, mic, attempts: int = 100):
    for _ in range(attempts):
        src = sample_position(rng, room)
        if np.linalg.norm(src - mic) >= MIN_SRC_MIC_DIST:
            return src
    raise RuntimeError("could not place a source away from the microphone")


def build_dataset(spec: DatasetSpec) -> LabeledDataset:
    """Deterministic per seed: rooms, layouts, crops, and splits all derive
    from one generator consumed in a fixed order."""
    rng = np.random.default_rng(spec.seed)
    samples: list[Sample] = []
    for room_id in range(spec.n_rooms):
        room = sample_room(rng, spec.rt60_range_s)
        for _ in range(spec.mics_per_room):
            mic = sample_position(rng, room)
            for _ in range(spec.sources_per_mic):
                src = _draw_geometry(rng, room, mic)
                pool, crop_samples = _render_pool(
                    rng, room, src, mic, spec.max_order, spec.crop_lengths_s
                )
                offset = int(rng.integers(0, len(pool) - crop_samples + 1))
                segment = pool[offset : offset + crop_samples]
                features = to_subbands(stft_features(torch.from_numpy(segment)))
                samples.append(
                    Sample(
                        features=features,
                        distance_m=float(np.linalg.norm(src - mic)),
                        room_id=room_id,
                        frame_count=features.shape[-1],
                        src=src,
                        mic=mic,
                        wet_pool=pool,
                        crop_samples=crop_samples,
                    )
                )
    return _split(samples, spec, rng)


def _split(samples, spec: DatasetSpec, rng) -> LabeledDataset:
    train_frac, val_frac, _ = spec.split
    if spec.room_split_mode == "pooled":
        order = rng.permutation(len(samples))
        n_train = int(round(train_frac * len(samples)))
        n_val = int(round(val_frac * len(samples)))
        train = [samples[i] for i in order[:n_train]]
        val = [samples[i] for i in order[n_train : n_train + n_val]]
        test = [samples[i] for i in order[n_train + n_val :]]
    else:
        room_ids = sorted({s.room_id for s in samples})
        shuffled = list(rng.permutation(room_ids))
        n_train_rooms = int(round((train_frac + val_frac) * len(room_ids)))
        train_rooms = set(shuffled[:n_train_rooms])
        pool = [s for s in samples if s.room_id in train_rooms]
        test = [s for s in samples if s.room_id not in train_rooms]
        order = rng.permutation(len(pool))
        n_val = int(round(val_frac / (train_frac + val_frac) * len(pool)))
        val = [pool[i] for i in order[:n_val]]
        train = [pool[i] for i in order[n_val:]]
    return LabeledDataset(train=train, val=val, test=test, spec=spec)


def constant_mean_baseline_mae(train, test) -> float:
    """MAE of always predicting the training-set mean distance."""
    mean = float(np.mean([s.distance_m for s in train]))
    return float(np.mean([abs(s.distance_m - mean) for s in test]))
