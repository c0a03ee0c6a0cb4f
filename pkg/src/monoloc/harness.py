"""Experiment orchestration: scenario configuration, trajectory generation,
streaming audio segmentation, estimator/EKF wiring, metrics, and batch sweeps.

A scenario fully determines one run: the room, the stationary source, the
robot's path, the chirp excitation, the measurement back end, and the seed.
Runs are deterministic; identical (scenario, seed) pairs serialize to
byte-identical traces.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from . import localization
from .acoustics import (
    ChirpSpec,
    ImageSourceModel,
    RoomSpec,
    resolve_point,
    synthesize_chirp,
)
from .estimators import (
    DistanceMeasurement,
    DrrCalibration,
    DrrEstimator,
    EstimatorError,
    FanetEstimator,
    OracleEstimator,
    drr_calibrate,
)
from .localization import (
    MicMount,
    RobotPose,
    SourceBelief,
    TraceRecord,
    FilterTrace,
    UpdateInfo,
    mic_global,
    predict,
    update,
)

log = logging.getLogger(__name__)

WALL_MARGIN_M = 0.1


@dataclass
class TrajectorySpec:
    """Robot path: a constant-rate circle or a uniform-speed waypoint chain."""

    kind: str = "circle"
    sample_period_s: float = 0.1
    center: tuple = (2.95, 3.45)
    radius_m: float = 1.0
    angular_speed_rad_s: float = 2.0 * math.pi / 60.0
    waypoints: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("circle", "waypoints"):
            raise ValueError(f"unknown trajectory kind '{self.kind}'")
        if self.sample_period_s <= 0:
            raise ValueError("sample_period_s must be positive")
        if self.kind == "circle" and self.radius_m <= 0:
            raise ValueError("radius_m must be positive")
        if self.kind == "waypoints" and len(self.waypoints) < 2:
            raise ValueError("waypoint trajectories need at least two points")

    def to_dict(self) -> dict:
        data = {"kind": self.kind, "sample_period_s": self.sample_period_s}
        if self.kind == "circle":
            data.update(
                center=list(self.center),
                radius_m=self.radius_m,
                angular_speed_rad_s=self.angular_speed_rad_s,
            )
        else:
            data["waypoints"] = [list(map(float, w)) for w in self.waypoints]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrajectorySpec":
        return cls(**data)


class Trajectory:
    """A trajectory spec bound to a run duration; evaluates poses exactly."""

    def __init__(self, spec: TrajectorySpec, duration_s: float):
        self.spec = spec
        self.duration_s = duration_s
        if spec.kind == "waypoints":
            pts = np.asarray(spec.waypoints, dtype=np.float64)
            seg = np.diff(pts, axis=0)
            seg_len = np.linalg.norm(seg, axis=1)
            if np.any(seg_len == 0):
                raise ValueError("consecutive waypoints must be distinct")
            self._pts = pts
            self._cum = np.concatenate([[0.0], np.cumsum(seg_len)])
            self._speed = self._cum[-1] / duration_s

    def pose_at(self, t: float) -> RobotPose:
        spec = self.spec
        if spec.kind == "circle":
            cx, cy = spec.center
            w = spec.angular_speed_rad_s
            angle = w * t
            x = cx + spec.radius_m * math.cos(angle)
            y = cy + spec.radius_m * math.sin(angle)
            heading = angle + math.copysign(math.pi / 2.0, w if w != 0 else 1.0)
            return RobotPose(x, y, heading)
        arc = min(self._speed * t, self._cum[-1])
        i = int(np.searchsorted(self._cum, arc, side="right") - 1)
        i = min(i, len(self._pts) - 2)
        seg = self._pts[i + 1] - self._pts[i]
        seg_len = float(np.linalg.norm(seg))
        frac = (arc - self._cum[i]) / seg_len
        pos = self._pts[i] + frac * seg
        heading = math.atan2(seg[1], seg[0])
        return RobotPose(pos[0], pos[1], heading)


def generate_trajectory(spec: TrajectorySpec, duration_s: float) -> list[RobotPose]:
    """Sample poses every ``sample_period_s`` over ``[0, duration_s]``."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    trajectory = Trajectory(spec, duration_s)
    steps = int(math.floor(duration_s / spec.sample_period_s + 1e-9))
    return [trajectory.pose_at(k * spec.sample_period_s) for k in range(steps + 1)]


@dataclass
class ScenarioConfig:
    room: RoomSpec
    source_pos: tuple = (2.0, 2.5)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    estimator: dict = field(default_factory=lambda: {"kind": "oracle", "sigma_m": 0.1})
    mic_offset_m: tuple = (0.1, 0.0)
    mic_height_m: float | None = None
    source_height_m: float | None = None
    segment_publish_s: float = 0.1
    segment_process_s: float = 0.2
    ekf_init_mean: tuple = (1.0, 1.0)
    ekf_init_cov: tuple = ((1.0, 0.0), (0.0, 1.0))
    seed: int = 0
    duration_s: float = 30.0
    chirp: ChirpSpec = field(default_factory=ChirpSpec)
    snr_db: float | None = None
    max_order: int = 20
    gate_sigma: float | None = None

    def __post_init__(self):
        ratio = self.segment_process_s / self.segment_publish_s
        if self.segment_process_s < self.segment_publish_s or abs(
            ratio - round(ratio)
        ) > 1e-9:
            raise ValueError(
                "segment_process_s must be an integer multiple of segment_publish_s"
            )
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if not self.room.contains(self.source_xyz()):
            raise ValueError("source position lies outside the room")
        self._validate_path()

    # -- geometry helpers ---------------------------------------------------

    def mic_mount(self) -> MicMount:
        return MicMount(np.asarray(self.mic_offset_m, dtype=np.float64))

    def mic_height(self) -> float:
        return self.mic_height_m if self.mic_height_m is not None else self.room.height_m / 2.0

    def source_xyz(self) -> np.ndarray:
        z = self.source_height_m if self.source_height_m is not None else self.mic_height()
        return np.array([self.source_pos[0], self.source_pos[1], z])

    def mic_xyz(self, mic2d: np.ndarray) -> np.ndarray:
        return np.array([mic2d[0], mic2d[1], self.mic_height()])

    def initial_belief(self) -> SourceBelief:
        return SourceBelief(
            np.asarray(self.ekf_init_mean, dtype=np.float64),
            np.asarray(self.ekf_init_cov, dtype=np.float64),
        )

    def _validate_path(self):
        trajectory = Trajectory(self.trajectory, self.duration_s)
        mount = self.mic_mount()
        steps = int(self.duration_s / self.segment_publish_s) + 1
        for k in range(steps):
            pose = trajectory.pose_at(k * self.segment_publish_s)
            if not self.room.contains(
                np.array([pose.x_m, pose.y_m, self.mic_height()]), WALL_MARGIN_M
            ):
                raise ValueError(
                    f"trajectory leaves the {WALL_MARGIN_M} m wall margin at "
                    f"t={k * self.segment_publish_s:.2f} s"
                )
            mic = mic_global(pose, mount)
            if not self.room.contains(self.mic_xyz(mic)):
                raise ValueError("microphone leaves the room along the trajectory")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        room = {
            "length_m": self.room.length_m,
            "width_m": self.room.width_m,
            "height_m": self.room.height_m,
            "absorption": self.room.absorption,
            "target_rt60_s": self.room.target_rt60_s,
            "speed_of_sound_mps": self.room.speed_of_sound_mps,
            "sample_rate_hz": self.room.sample_rate_hz,
        }
        return {
            "room": {k: v for k, v in room.items() if v is not None},
            "source_pos": list(self.source_pos),
            "trajectory": self.trajectory.to_dict(),
            "estimator": self.estimator,
            "mic_offset_m": list(self.mic_offset_m),
            "mic_height_m": self.mic_height_m,
            "source_height_m": self.source_height_m,
            "segment_publish_s": self.segment_publish_s,
            "segment_process_s": self.segment_process_s,
            "ekf_init_mean": list(self.ekf_init_mean),
            "ekf_init_cov": [list(row) for row in self.ekf_init_cov],
            "seed": self.seed,
            "duration_s": self.duration_s,
            "chirp": {
                "f_start_hz": self.chirp.f_start_hz,
                "f_end_hz": self.chirp.f_end_hz,
                "period_s": self.chirp.period_s,
                "amplitude": self.chirp.amplitude,
            },
            "snr_db": self.snr_db,
            "max_order": self.max_order,
            "gate_sigma": self.gate_sigma,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        room = RoomSpec(**data.pop("room"))
        trajectory = TrajectorySpec.from_dict(data.pop("trajectory"))
        chirp = ChirpSpec(**data.pop("chirp")) if "chirp" in data else ChirpSpec()
        known = {
            "source_pos",
            "estimator",
            "mic_offset_m",
            "mic_height_m",
            "source_height_m",
            "segment_publish_s",
            "segment_process_s",
            "ekf_init_mean",
            "ekf_init_cov",
            "seed",
            "duration_s",
            "snr_db",
            "max_order",
            "gate_sigma",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if v is not None or k in ("snr_db",)}
        return cls(room=room, trajectory=trajectory, chirp=chirp, **kwargs)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def default_scenario(**overrides) -> ScenarioConfig:
    """Mirror of the real-world protocol: 5.9 x 6.9 x 2.9 m room, RT60 0.6 s,
    circular path, EKF started at (1, 1) with identity covariance."""
    room = RoomSpec(5.9, 6.9, 2.9, target_rt60_s=0.6)
    return ScenarioConfig(room=room, **overrides)


# ---------------------------------------------------------------------------
# Streaming

@dataclass
class SegmentWindow:
    """One processing window: the latest ``segment_process_s`` of audio."""

    t_end_s: float
    mic_pos: np.ndarray  # 2-D mic position at the window midpoint
    audio: np.ndarray | None
    pose: RobotPose
    true_distance_m: float


def segment_counts(scenario: ScenarioConfig) -> tuple[int, int]:
    """(published segments, processed windows) for the configured run."""
    published = int(math.floor(scenario.duration_s / scenario.segment_publish_s + 1e-9))
    per_window = int(round(scenario.segment_process_s / scenario.segment_publish_s))
    return published, max(0, published - (per_window - 1))


def stream_segments(scenario: ScenarioConfig, *, render_audio: bool = True):
    """Yield processing windows in time order.

    Audio is rendered quasi-statically: the chirp (free-running from t=0) is
    convolved with the RIR frozen at the window-midpoint microphone position,
    with enough pre-roll that the reverberant tail of earlier excitation is
    present. With ``render_audio=False`` the windows carry ``audio=None``.
    """
    fs = scenario.room.sample_rate_hz
    publish, windows = segment_counts(scenario)
    per_window = int(round(scenario.segment_process_s / scenario.segment_publish_s))
    trajectory = Trajectory(scenario.trajectory, scenario.duration_s)
    mount = scenario.mic_mount()
    source = scenario.source_xyz()
    source2d = source[:2]

    model = None
    dry = None
    if render_audio:
        model = ImageSourceModel(scenario.room, source, scenario.max_order)
        dry = synthesize_chirp(scenario.chirp, scenario.duration_s, fs)
    noise_rng = np.random.default_rng([scenario.seed, 0xA0])

    win_len = int(round(scenario.segment_process_s * fs))
    for j in range(windows):
        t_end = (j + per_window) * scenario.segment_publish_s
        t_start = t_end - scenario.segment_process_s
        t_mid = 0.5 * (t_start + t_end)
        pose = trajectory.pose_at(t_mid)
        mic2d = mic_global(pose, mount)
        audio = None
        if render_audio:
            rir = model.rir_at(scenario.mic_xyz(mic2d))
            n0 = int(round(t_start * fs))
            n1 = n0 + win_len
            warm = len(rir.samples) - 1
            a = max(0, n0 - warm)
            wet = fftconvolve(dry[a:n1], rir.samples)
            audio = wet[n0 - a : n0 - a + win_len]
            if scenario.snr_db is not None:
                power = float(np.mean(audio**2))
                sigma = math.sqrt(power / 10.0 ** (scenario.snr_db / 10.0))
                audio = audio + noise_rng.normal(0.0, sigma, len(audio))
        yield SegmentWindow(
            t_end_s=t_end,
            mic_pos=mic2d,
            audio=audio,
            pose=pose,
            true_distance_m=float(np.linalg.norm(source2d - mic2d)),
        )


# ---------------------------------------------------------------------------
# Estimator construction

def default_calibration_positions(scenario: ScenarioConfig, count: int = 5):
    """Deterministic spread of in-room positions around the starting mic."""
    trajectory = Trajectory(scenario.trajectory, scenario.duration_s)
    mic0 = mic_global(trajectory.pose_at(0.0), scenario.mic_mount())
    room = scenario.room
    margin = 0.6
    lo = np.array([margin, margin])
    hi = np.array([room.length_m - margin, room.width_m - margin])
    distances = np.linspace(0.5, 3.5, count)
    angles = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False) + 0.3
    positions = []
    for d, theta in zip(distances, angles):
        p = mic0 + d * np.array([math.cos(theta), math.sin(theta)])
        positions.append(np.clip(p, lo, hi))
    return positions


def build_calibration(
    scenario: ScenarioConfig, positions=None
) -> DrrCalibration:
    """Render calibration segments at known source positions and fit the
    feature-to-distance map (the run-time mirror of placing a speaker at a
    few surveyed spots)."""
    fs = scenario.room.sample_rate_hz
    positions = positions if positions is not None else default_calibration_positions(scenario)
    trajectory = Trajectory(scenario.trajectory, scenario.duration_s)
    mic2d = mic_global(trajectory.pose_at(0.0), scenario.mic_mount())
    mic3d = scenario.mic_xyz(mic2d)
    reference = synthesize_chirp(scenario.chirp, scenario.chirp.period_s, fs)
    win_len = int(round(scenario.segment_process_s * fs))
    warm_s = 1.0
    dry = synthesize_chirp(
        scenario.chirp, warm_s + scenario.segment_process_s + 0.1, fs
    )
    window_ms = float(scenario.estimator.get("direct_window_ms", 2.5))
    samples = []
    for pos in positions:
        pos3d = resolve_point(
            [pos[0], pos[1], scenario.mic_height()] if len(pos) == 2 else pos,
            scenario.room,
        )
        rir = ImageSourceModel(scenario.room, pos3d, scenario.max_order).rir_at(mic3d)
        wet = fftconvolve(dry, rir.samples)
        start = int(round(warm_s * fs))
        segment = wet[start : start + win_len]
        true_d = float(np.linalg.norm(np.asarray(pos[:2]) - mic2d))
        samples.append((segment, true_d))
    return drr_calibrate(samples, reference, fs, direct_window_ms=window_ms)


def build_estimator(scenario: ScenarioConfig):
    cfg = dict(scenario.estimator)
    kind = cfg.pop("kind", None)
    if kind == "oracle":
        rng = np.random.default_rng([scenario.seed, 0x0E])
        return OracleEstimator(sigma_m=float(cfg.get("sigma_m", 0.1)), rng=rng)
    if kind == "drr":
        fs = scenario.room.sample_rate_hz
        reference = synthesize_chirp(scenario.chirp, scenario.chirp.period_s, fs)
        if "calibration" in cfg:
            calibration = DrrCalibration.from_dict(cfg["calibration"])
        elif "calibration_file" in cfg:
            with open(cfg["calibration_file"], "r", encoding="utf-8") as fh:
                calibration = DrrCalibration.from_dict(json.load(fh))
        else:
            calibration = build_calibration(scenario, cfg.get("calibration_positions"))
        return DrrEstimator(calibration, reference)
    if kind == "fanet":
        from .fanet import build, load_weights_file

        container = load_weights_file(cfg["weights_file"])
        model = build(container.config, weights=container)
        kwargs = {"sample_rate_hz": scenario.room.sample_rate_hz}
        if "variance_m2" in cfg:
            kwargs["variance_m2"] = float(cfg["variance_m2"])
        return FanetEstimator(model, **kwargs)
    raise ValueError(f"unknown estimator kind '{kind}'")


# ---------------------------------------------------------------------------
# Running

@dataclass
class StepRecord:
    t_s: float
    pose: RobotPose
    mic_pos: np.ndarray
    measurement: DistanceMeasurement | None
    belief: SourceBelief
    info: UpdateInfo
    error_m: float


@dataclass
class RunResult:
    scenario: ScenarioConfig
    steps: list
    published_segments: int
    final_error_m: float
    mae_last_quarter_m: float

    @property
    def processed_windows(self) -> int:
        return len(self.steps)

    def filter_trace(self) -> FilterTrace:
        return FilterTrace(
            [TraceRecord(s.t_s, s.belief, s.info) for s in self.steps]
        )

    def trace_csv_lines(self) -> list[str]:
        return localization.trace_csv_lines(self.filter_trace())


def run_scenario(scenario: ScenarioConfig) -> RunResult:
    """Wire stream -> estimator -> EKF and collect the full trace."""
    estimator = build_estimator(scenario)
    belief = scenario.initial_belief()
    source2d = np.asarray(scenario.source_pos, dtype=np.float64)
    steps: list[StepRecord] = []
    for window in stream_segments(
        scenario, render_audio=getattr(estimator, "needs_audio", True)
    ):
        belief = predict(belief)
        measurement = None
        try:
            measurement = estimator.estimate(
                window.audio,
                timestamp_s=window.t_end_s,
                true_distance_m=window.true_distance_m,
                segment_len_s=scenario.segment_process_s,
            )
        except EstimatorError as exc:
            log.warning("segment at t=%.2f s skipped: %s", window.t_end_s, exc)
            info = UpdateInfo(False, math.nan, math.nan)
        if measurement is not None:
            belief, info = update(
                belief, window.mic_pos, measurement, gate_sigma=scenario.gate_sigma
            )
        steps.append(
            StepRecord(
                t_s=window.t_end_s,
                pose=window.pose,
                mic_pos=window.mic_pos,
                measurement=measurement,
                belief=belief,
                info=info,
                error_m=float(np.linalg.norm(belief.mean - source2d)),
            )
        )
    if not steps:
        raise ValueError("scenario produced no processing windows")
    published, _ = segment_counts(scenario)
    tail = steps[-max(1, len(steps) // 4) :]
    return RunResult(
        scenario=scenario,
        steps=steps,
        published_segments=published,
        final_error_m=steps[-1].error_m,
        mae_last_quarter_m=float(np.mean([s.error_m for s in tail])),
    )


def write_run_outputs(result: RunResult, out_dir, stem: str, plot_data: bool = False):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{stem}.trace.csv"
    trace_path.write_text("\n".join(result.trace_csv_lines()) + "\n", encoding="utf-8")
    if plot_data:
        lines = ["# t error_m sx sy mic_x mic_y"]
        for s in result.steps:
            lines.append(
                " ".join(
                    repr(float(v))
                    for v in (
                        s.t_s,
                        s.error_m,
                        s.belief.mean[0],
                        s.belief.mean[1],
                        s.mic_pos[0],
                        s.mic_pos[1],
                    )
                )
            )
        (out / f"{stem}.plot.dat").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return trace_path


AGGREGATE_CSV_HEADER = (
    "scenario,seed,estimator,windows,final_error_m,mae_last_quarter_m,status"
)


@dataclass
class SweepSpec:
    scenario_files: list
    seeds: list

    @classmethod
    def from_file(cls, path) -> "SweepSpec":
        base = Path(path).parent
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        seeds = data.get("seeds")
        if isinstance(seeds, dict):
            seeds = list(range(seeds["start"], seeds["start"] + seeds["count"]))
        if not seeds:
            seeds = [0]
        return cls(
            scenario_files=[str(base / p) for p in data["scenarios"]],
            seeds=[int(s) for s in seeds],
        )


def sweep(spec: SweepSpec, out_dir) -> list[str]:
    """Run every scenario x seed combination; one aggregate CSV row each.

    Individual failures are recorded in the row and do not stop the sweep.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [AGGREGATE_CSV_HEADER]
    for path in spec.scenario_files:
        stem = Path(path).stem
        for seed in spec.seeds:
            name = f"{stem}_seed{seed}"
            try:
                scenario = ScenarioConfig.from_file(path)
                scenario.seed = seed
                result = run_scenario(scenario)
                write_run_outputs(result, out / "runs", name)
                rows.append(
                    ",".join(
                        [
                            stem,
                            str(seed),
                            scenario.estimator.get("kind", "?"),
                            str(result.processed_windows),
                            repr(result.final_error_m),
                            repr(result.mae_last_quarter_m),
                            "ok",
                        ]
                    )
                )
            except Exception as exc:  # noqa: BLE001 - sweep must survive bad runs
                log.error("run %s failed: %s", name, exc)
                rows.append(f"{stem},{seed},?,0,nan,nan,failed: {exc}")
    (out / "aggregate.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    return rows
