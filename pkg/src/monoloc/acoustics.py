"""Room acoustics: geometry, image-source impulse responses, chirp sources,
recordings, and the RT60 / DRR descriptors derived from an impulse response.

All signals are plain float64 numpy arrays at a fixed sample rate. Rooms are
rectangular ("shoebox") with a uniform per-surface absorption coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

SPEED_OF_SOUND_MPS = 343.0
DEFAULT_SAMPLE_RATE_HZ = 16000
DEFAULT_MAX_ORDER = 20


class DegenerateRirError(ValueError):
    """Raised when a descriptor is undefined for the given impulse response."""


@dataclass
class RoomSpec:
    """Rectangular room with uniform wall absorption.

    ``absorption`` is the per-bounce amplitude absorption: each reflection
    multiplies the image amplitude by ``1 - absorption``. If omitted, it is
    derived from ``target_rt60_s`` via Sabine's formula (the Sabine energy
    coefficient ``a_e`` maps to ``1 - sqrt(1 - a_e)`` in amplitude terms).
    """

    length_m: float
    width_m: float
    height_m: float
    absorption: float | None = None
    target_rt60_s: float | None = None
    speed_of_sound_mps: float = SPEED_OF_SOUND_MPS
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        for name in ("length_m", "width_m", "height_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.sample_rate_hz <= 0 or self.speed_of_sound_mps <= 0:
            raise ValueError("sample rate and speed of sound must be positive")
        if self.absorption is None and self.target_rt60_s is None:
            raise ValueError("specify either absorption or target_rt60_s")
        if self.absorption is not None and self.target_rt60_s is not None:
            raise ValueError("absorption and target_rt60_s are mutually exclusive")
        if self.absorption is not None and not 0.0 < self.absorption <= 1.0:
            raise ValueError("absorption must lie in (0, 1]")
        if self.target_rt60_s is not None and self.target_rt60_s <= 0:
            raise ValueError("target_rt60_s must be positive")

    @property
    def dimensions_m(self) -> np.ndarray:
        return np.array([self.length_m, self.width_m, self.height_m])

    @property
    def volume_m3(self) -> float:
        return self.length_m * self.width_m * self.height_m

    @property
    def surface_m2(self) -> float:
        l, w, h = self.length_m, self.width_m, self.height_m
        return 2.0 * (l * w + l * h + w * h)

    def wall_absorption(self) -> float:
        """Effective amplitude absorption coefficient of every surface."""
        if self.absorption is not None:
            return self.absorption
        alpha_energy = 0.161 * self.volume_m3 / (self.target_rt60_s * self.surface_m2)
        alpha_energy = min(alpha_energy, 0.999)
        return 1.0 - math.sqrt(1.0 - alpha_energy)

    def contains(self, point, margin_m: float = 0.0) -> bool:
        p = resolve_point(point, self)
        return bool(np.all(p > margin_m) and np.all(self.dimensions_m - p > margin_m))


@dataclass
class RirSignal:
    """Sampled room impulse response between one source and one microphone."""

    samples: np.ndarray
    sample_rate_hz: int
    direct_path_index: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("RIR samples must be one-dimensional")
        if not 0 <= self.direct_path_index < len(self.samples):
            raise ValueError("direct_path_index outside the sampled range")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass
class ChirpSpec:
    """Repeating linear frequency sweep."""

    f_start_hz: float = 0.0
    f_end_hz: float = 8000.0
    period_s: float = 0.1
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0 <= self.f_start_hz < self.f_end_hz:
            raise ValueError("need 0 <= f_start_hz < f_end_hz")
        if self.period_s <= 0:
            raise ValueError("period_s must be positive")


def resolve_point(point, room: RoomSpec) -> np.ndarray:
    """Promote a 2-D point to 3-D at mid room height; pass 3-D through."""
    p = np.asarray(point, dtype=np.float64).reshape(-1)
    if p.shape == (2,):
        return np.array([p[0], p[1], room.height_m / 2.0])
    if p.shape == (3,):
        return p.copy()
    raise ValueError("points must have 2 or 3 coordinates")


class ImageSourceModel:
    """Image-source lattice for one (room, source) pair.

    Image positions depend only on the room and the source, so a single model
    serves any number of microphone positions; ``rir_at`` is the per-microphone
    step. Reflections up to ``max_order`` are kept, each attenuated by
    ``(1 - absorption)**order / distance`` and binned at the nearest sample.
    """

    def __init__(self, room: RoomSpec, source, max_order: int = DEFAULT_MAX_ORDER):
        if max_order < 0:
            raise ValueError("max_order must be >= 0")
        src = resolve_point(source, room)
        if not room.contains(src):
            raise ValueError(f"source {src.tolist()} lies outside the room")
        self.room = room
        self.source = src
        self.max_order = int(max_order)
        self._positions, self._orders = _image_lattice(room.dimensions_m, src, max_order)
        refl = 1.0 - room.wall_absorption()
        self._gains = refl ** self._orders

    def rir_at(self, mic) -> RirSignal:
        room = self.room
        m = resolve_point(mic, room)
        if not room.contains(m):
            raise ValueError(f"microphone {m.tolist()} lies outside the room")
        if np.allclose(m, self.source):
            raise ValueError("source and microphone positions coincide")

        fs = room.sample_rate_hz
        c = room.speed_of_sound_mps
        dist = np.linalg.norm(self._positions - m, axis=1)
        idx = np.rint(dist * fs / c).astype(np.int64)
        amp = self._gains / dist

        direct_index = int(round(np.linalg.norm(self.source - m) * fs / c))
        # Keep the direct spike inside the leading 10% so the tail stays quiet.
        n = max(int(idx.max()) + 1, (direct_index + 1) * 10 + 10)
        h = np.zeros(n)
        np.add.at(h, idx, amp)
        return RirSignal(h, fs, direct_index)


def _image_lattice(dims: np.ndarray, src: np.ndarray, max_order: int):
    half = max_order // 2 + 1
    span = np.arange(-half, half + 1)
    grid = np.array(np.meshgrid(span, span, span, indexing="ij")).reshape(3, -1).T
    positions, orders = [], []
    for px in (0, 1):
        for py in (0, 1):
            for pz in (0, 1):
                parity = np.array([px, py, pz])
                order = np.abs(grid).sum(axis=1) + np.abs(grid + parity).sum(axis=1)
                keep = order <= max_order
                positions.append((1 - 2 * parity) * src + 2 * grid[keep] * dims)
                orders.append(order[keep])
    return np.concatenate(positions), np.concatenate(orders)


def generate_rir(room: RoomSpec, src, mic, max_order: int = DEFAULT_MAX_ORDER) -> RirSignal:
    """Deterministic image-source RIR between ``src`` and ``mic``."""
    return ImageSourceModel(room, src, max_order).rir_at(mic)


def synthesize_chirp(
    spec: ChirpSpec, duration_s: float, sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
) -> np.ndarray:
    """Linear sweep repeating every ``period_s``, phase-continuous per period."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if spec.f_end_hz > sample_rate_hz / 2:
        raise ValueError("f_end_hz exceeds the Nyquist frequency")
    n = int(round(duration_s * sample_rate_hz))
    samples_per_period = spec.period_s * sample_rate_hz
    if abs(samples_per_period - round(samples_per_period)) < 1e-9:
        # integer samples per period: index arithmetic keeps repeats bit-exact
        t = (np.arange(n) % round(samples_per_period)) / sample_rate_hz
    else:
        t = (np.arange(n) / sample_rate_hz) % spec.period_s
    sweep_rate = (spec.f_end_hz - spec.f_start_hz) / spec.period_s
    phase = 2.0 * np.pi * (spec.f_start_hz * t + 0.5 * sweep_rate * t * t)
    return spec.amplitude * np.sin(phase)


def render_recording(
    source_signal: np.ndarray,
    rir: RirSignal,
    snr_db: float | None = None,
    *,
    source_sample_rate_hz: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Convolve a dry signal with an RIR, optionally adding white noise.

    ``snr_db`` is the segment-level ratio of reverberant-signal power to noise
    power; the noise draw comes from ``rng`` so callers control determinism.
    """
    if source_sample_rate_hz is not None and source_sample_rate_hz != rir.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: source {source_sample_rate_hz} Hz "
            f"vs RIR {rir.sample_rate_hz} Hz"
        )
    src = np.asarray(source_signal, dtype=np.float64)
    out = fftconvolve(src, rir.samples, mode="full")
    out = out[: len(src) + len(rir.samples) - 1]
    if snr_db is not None:
        if rng is None:
            raise ValueError("snr_db requires an explicit rng for the noise draw")
        power = float(np.mean(out**2))
        noise_power = power / (10.0 ** (snr_db / 10.0))
        out = out + rng.normal(0.0, math.sqrt(noise_power), len(out))
    return out


def compute_rt60(rir: RirSignal) -> float:
    """Reverberation time from Schroeder backward integration.

    The energy-decay curve is fit between -5 and -25 dB and extrapolated to
    -60 dB. Image-source RIRs should be generated with enough reflection
    order that the decay reaches -25 dB before the lattice runs out.
    """
    if rir.duration_s < 0.1:
        raise ValueError("RIR must cover at least 0.1 s for an RT60 estimate")
    if not np.any(rir.samples):
        raise DegenerateRirError("all-zero RIR has no defined RT60")

    h = rir.samples
    power = h * h
    edc = np.cumsum(power[::-1])[::-1]
    edc /= edc[0]
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(edc)

    start = int(np.argmax(db <= -5.0))
    stop = int(np.argmax(db <= -25.0))
    if stop <= start + 1:
        return 0.0
    t = np.arange(len(h)) / rir.sample_rate_hz
    design = np.vstack([t[start:stop], np.ones(stop - start)]).T
    slope, _ = np.linalg.lstsq(design, db[start:stop], rcond=None)[0]
    if slope >= 0:
        raise DegenerateRirError("energy-decay curve does not decay")
    return float(-60.0 / slope)


def compute_drr(rir: RirSignal, direct_window_ms: float = 2.5) -> float:
    """Direct-to-reverberant energy ratio in dB.

    Direct energy is taken in a +-``direct_window_ms`` window around the
    direct-path arrival. Returns ``math.inf`` when there is no reverberant
    energy at all.
    """
    if direct_window_ms <= 0:
        raise ValueError("direct_window_ms must be positive")
    half = int(round(direct_window_ms * 1e-3 * rir.sample_rate_hz))
    lo = max(0, rir.direct_path_index - half)
    hi = min(len(rir.samples), rir.direct_path_index + half + 1)
    power = rir.samples**2
    direct = float(np.sum(power[lo:hi]))
    reverberant = float(np.sum(power)) - direct
    if direct <= 0.0:
        raise DegenerateRirError("no energy in the direct-path window")
    if reverberant <= 0.0:
        return math.inf
    return 10.0 * math.log10(direct / reverberant)


def write_rir_wav(rir: RirSignal, path) -> None:
    """Export as 32-bit float little-endian mono WAV."""
    from scipy.io import wavfile

    wavfile.write(path, rir.sample_rate_hz, rir.samples.astype("<f4"))
