"""Robot / microphone / source geometry and the range-only extended Kalman
filter that turns scalar distance measurements into a 2-D source belief.

The source is static, so prediction is the identity; all the work happens in
the scalar-innovation update. The filter state is a mean and a 2x2 covariance,
and every update re-symmetrizes the covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

COINCIDENCE_EPS_M = 1e-6


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass
class RobotPose:
    x_m: float
    y_m: float
    theta_rad: float

    def __post_init__(self):
        self.theta_rad = normalize_angle(self.theta_rad)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m])


@dataclass
class MicMount:
    """Microphone position in the robot body frame."""

    offset_m: np.ndarray

    def __post_init__(self):
        self.offset_m = np.asarray(self.offset_m, dtype=np.float64).reshape(2)
        if not np.all(np.isfinite(self.offset_m)):
            raise ValueError("microphone mount offset must be finite")


@dataclass
class SourceBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(2)
        self.cov = np.asarray(self.cov, dtype=np.float64).reshape(2, 2)
        if not np.allclose(self.cov, self.cov.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(self.cov) <= 0):
            raise ValueError("covariance must be positive definite")

    def copy(self) -> "SourceBelief":
        return SourceBelief(self.mean.copy(), self.cov.copy())


@dataclass
class UpdateInfo:
    accepted: bool
    innovation_m: float
    predicted_distance_m: float


def mic_global(pose: RobotPose, mount: MicMount) -> np.ndarray:
    """Microphone position in the global frame: R(theta) @ p_M + p."""
    c, s = math.cos(pose.theta_rad), math.sin(pose.theta_rad)
    rot = np.array([[c, -s], [s, c]])
    return rot @ mount.offset_m + pose.position


def predict(belief: SourceBelief, process_noise_var: float = 0.0) -> SourceBelief:
    """Static-source prediction: the belief is carried over unchanged.

    A nonzero ``process_noise_var`` inflates the covariance by that isotropic
    amount, keeping the gain from collapsing; useful with near-exact
    measurements where the harmonically decaying gain would otherwise freeze
    residual linearization error in place.
    """
    if process_noise_var < 0:
        raise ValueError("process_noise_var must be >= 0")
    if process_noise_var == 0.0:
        return belief.copy()
    return SourceBelief(belief.mean.copy(), belief.cov + process_noise_var * np.eye(2))


def update(
    belief: SourceBelief,
    mic: np.ndarray,
    z,
    *,
    gate_sigma: float | None = None,
    coincidence_eps_m: float = COINCIDENCE_EPS_M,
) -> tuple[SourceBelief, UpdateInfo]:
    """Scalar EKF correction for one distance measurement.

    The observation Jacobian is the unit vector from the microphone to the
    estimated source; when estimate and microphone (nearly) coincide it is
    undefined and the update is skipped with ``accepted=False``. The optional
    ``gate_sigma`` rejects innovations larger than that many predicted
    standard deviations (disabled by default).
    """
    mic = np.asarray(mic, dtype=np.float64).reshape(2)
    offset = belief.mean - mic
    predicted = float(np.linalg.norm(offset))
    if predicted <= coincidence_eps_m:
        return belief.copy(), UpdateInfo(False, math.nan, predicted)

    jac = offset / predicted  # 1x2 observation Jacobian, unit norm
    innovation = z.distance_m - predicted
    s = float(jac @ belief.cov @ jac) + z.variance_m2
    if gate_sigma is not None and abs(innovation) > gate_sigma * math.sqrt(s):
        return belief.copy(), UpdateInfo(False, innovation, predicted)

    gain = (belief.cov @ jac) / s  # 2x1 Kalman gain
    mean = belief.mean + gain * innovation
    cov = (np.eye(2) - np.outer(gain, jac)) @ belief.cov
    cov = 0.5 * (cov + cov.T)
    return SourceBelief(mean, cov), UpdateInfo(True, innovation, predicted)


@dataclass
class TraceRecord:
    timestamp_s: float
    belief: SourceBelief
    info: UpdateInfo


@dataclass
class FilterTrace:
    records: list

    @property
    def final_belief(self) -> SourceBelief:
        return self.records[-1].belief

    def positions(self) -> np.ndarray:
        return np.array([r.belief.mean for r in self.records])


def run_filter(
    init: SourceBelief,
    measurements,
    *,
    gate_sigma: float | None = None,
    process_noise_var: float = 0.0,
) -> FilterTrace:
    """Run predict/update over time-ordered (timestamp, mic, measurement)
    triples and return one belief per measurement."""
    belief = init.copy()
    records = []
    last_t = -math.inf
    for timestamp_s, mic, z in measurements:
        if timestamp_s < last_t:
            raise ValueError(
                f"measurement at t={timestamp_s} arrived after t={last_t}"
            )
        last_t = timestamp_s
        belief = predict(belief, process_noise_var)
        belief, info = update(belief, mic, z, gate_sigma=gate_sigma)
        records.append(TraceRecord(timestamp_s, belief, info))
    return FilterTrace(records)


TRACE_CSV_HEADER = "timestamp,s_x,s_y,p11,p12,p22,innovation,accepted_flag"


def trace_csv_lines(trace: FilterTrace) -> list[str]:
    """Render a trace in the fixed CSV schema (deterministic formatting)."""
    lines = [TRACE_CSV_HEADER]
    for rec in trace.records:
        cov = rec.belief.cov
        innovation = rec.info.innovation_m
        lines.append(
            ",".join(
                [
                    repr(float(rec.timestamp_s)),
                    repr(float(rec.belief.mean[0])),
                    repr(float(rec.belief.mean[1])),
                    repr(float(cov[0, 0])),
                    repr(float(cov[0, 1])),
                    repr(float(cov[1, 1])),
                    "nan" if math.isnan(innovation) else repr(float(innovation)),
                    "1" if rec.info.accepted else "0",
                ]
            )
        )
    return lines


def write_trace_csv(path, trace: FilterTrace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(trace_csv_lines(trace)) + "\n")
