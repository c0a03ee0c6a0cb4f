"""Self-contained room simulation for dataset synthesis: shoebox rooms with
Sabine-matched absorption, image-source impulse responses, and the repeating
chirp excitation. Numpy only; the inference package is not imported."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_SOUND = 343.0
SAMPLE_RATE = 16000

ROOM_DIM_LOW = (5.4, 6.4, 2.5)
ROOM_DIM_HIGH = (6.4, 7.4, 3.5)


@dataclass(frozen=True)
class Room:
    dims: tuple
    absorption: float  # per-bounce amplitude absorption
    rt60_s: float

    @classmethod
    def from_rt60(cls, dims, rt60_s: float) -> "Room":
        lx, ly, lz = dims
        volume = lx * ly * lz
        surface = 2.0 * (lx * ly + lx * lz + ly * lz)
        alpha_energy = min(0.161 * volume / (rt60_s * surface), 0.999)
        return cls(tuple(dims), 1.0 - math.sqrt(1.0 - alpha_energy), rt60_s)


def sample_room(rng: np.random.Generator, rt60_range) -> Room:
    dims = rng.uniform(ROOM_DIM_LOW, ROOM_DIM_HIGH)
    rt60 = float(rng.uniform(rt60_range[0], rt60_range[1]))
    return Room.from_rt60(tuple(dims), rt60)


def sample_position(rng: np.random.Generator, room: Room, margin: float = 0.5):
    lo = np.full(3, margin)
    hi = np.asarray(room.dims) - margin
    return rng.uniform(lo, hi)


def image_source_rir(
    room: Room,
    src,
    mic,
    max_order: int = 20,
    fs: int = SAMPLE_RATE,
    c: float = SPEED_OF_SOUND,
) -> np.ndarray:
    """Shoebox image-source response with per-reflection amplitude
    (1 - absorption)**order / distance, binned at the nearest sample."""
    dims = np.asarray(room.dims, dtype=np.float64)
    src = np.asarray(src, dtype=np.float64)
    mic = np.asarray(mic, dtype=np.float64)
    half = max_order // 2 + 1
    span = np.arange(-half, half + 1)
    grid = np.array(np.meshgrid(span, span, span, indexing="ij")).reshape(3, -1).T

    positions = []
    orders = []
    for px in (0, 1):
        for py in (0, 1):
            for pz in (0, 1):
                parity = np.array([px, py, pz])
                order = np.abs(grid).sum(axis=1) + np.abs(grid + parity).sum(axis=1)
                keep = order <= max_order
                positions.append((1 - 2 * parity) * src + 2 * grid[keep] * dims)
                orders.append(order[keep])
    positions = np.concatenate(positions)
    orders = np.concatenate(orders)

    dist = np.linalg.norm(positions - mic, axis=1)
    idx = np.rint(dist * fs / c).astype(np.int64)
    amp = (1.0 - room.absorption) ** orders / dist
    h = np.zeros(int(idx.max()) + 1)
    np.add.at(h, idx, amp)
    return h


def chirp(duration_s: float, fs: int = SAMPLE_RATE, f_end: float = 8000.0,
          period_s: float = 0.1) -> np.ndarray:
    """0..f_end linear sweep repeating every period, phase reset per period."""
    n = int(round(duration_s * fs))
    per = round(period_s * fs)
    t = (np.arange(n) % per) / fs
    rate = f_end / period_s
    return np.sin(2.0 * np.pi * 0.5 * rate * t * t)
