"""Distance-measurement channels: every estimator maps an audio segment (or
ground truth, for the oracle) to a distance plus variance for the filter.

Three interchangeable back ends:

* ``OracleEstimator`` -- ground truth plus Gaussian noise; isolates the filter
  from any audio processing.
* ``DrrEstimator`` -- matched-filter direct-to-reverberant proxy regressed
  against log-distance on a handful of calibration positions.
* ``FanetEstimator`` -- the neural network, averaging its per-frame outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .features import StftSpec, stft_features, to_subbands

# Smallest admissible measurement variance; keeps sigma=0 oracles valid.
VARIANCE_FLOOR_M2 = 1e-12

# Mean absolute error of a zero-mean Gaussian is sigma*sqrt(2/pi); this is the
# inverse factor for turning a validation MAE into a standard deviation.
MAE_TO_STD = math.sqrt(math.pi / 2.0)

DEFAULT_FANET_VARIANCE_M2 = (0.5 * MAE_TO_STD) ** 2


class EstimatorError(RuntimeError):
    """A measurement could not be produced from the given segment."""


@dataclass
class DistanceMeasurement:
    distance_m: float
    variance_m2: float
    timestamp_s: float = 0.0
    segment_len_s: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.distance_m) or self.distance_m < 0:
            raise ValueError(f"distance must be finite and >= 0, got {self.distance_m}")
        if not math.isfinite(self.variance_m2) or self.variance_m2 <= 0:
            raise ValueError(f"variance must be finite and > 0, got {self.variance_m2}")


def oracle_estimate(
    true_distance_m: float,
    sigma_m: float,
    rng: np.random.Generator,
    *,
    timestamp_s: float = 0.0,
    segment_len_s: float = 0.0,
) -> DistanceMeasurement:
    """True distance plus N(0, sigma^2) noise, clamped at zero."""
    if sigma_m < 0:
        raise ValueError("sigma_m must be >= 0")
    noisy = true_distance_m + sigma_m * rng.standard_normal() if sigma_m > 0 else true_distance_m
    return DistanceMeasurement(
        distance_m=max(0.0, noisy),
        variance_m2=max(sigma_m**2, VARIANCE_FLOOR_M2),
        timestamp_s=timestamp_s,
        segment_len_s=segment_len_s,
    )


def segment_drr_feature(
    segment: np.ndarray,
    reference: np.ndarray,
    sample_rate_hz: int,
    direct_window_ms: float = 2.5,
) -> float:
    """Direct-to-reverberant proxy of a recording of a known source signal.

    Matched-filters the segment with the dry reference (one excitation
    period); the correlation peak stands in for the direct arrival and the
    energy inside +-``direct_window_ms`` of it is rated against the rest.
    """
    seg = np.asarray(segment, dtype=np.float64)
    corr = fftconvolve(seg, reference[::-1])
    power = corr * corr
    peak = int(np.argmax(power))
    half = int(round(direct_window_ms * 1e-3 * sample_rate_hz))
    lo, hi = max(0, peak - half), min(len(power), peak + half + 1)
    direct = float(np.sum(power[lo:hi]))
    rest = float(np.sum(power)) - direct
    if rest <= 0.0 or direct <= 0.0:
        raise EstimatorError("segment has no usable correlation structure")
    return 10.0 * math.log10(direct / rest)


def fit_log_linear(features, distances_m) -> tuple[float, float, float]:
    """Least-squares fit log(distance) = slope*feature + intercept.

    Returns (slope, intercept, residual variance in log space, with n-2
    degrees of freedom where possible).
    """
    x = np.asarray(features, dtype=np.float64)
    d = np.asarray(distances_m, dtype=np.float64)
    if len(x) < 2 or len(np.unique(d)) < 2:
        raise ValueError("need at least two samples at distinct distances")
    if np.any(d <= 0):
        raise ValueError("distances must be positive")
    y = np.log(d)
    design = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - (slope * x + intercept)
    dof = max(1, len(x) - 2)
    return float(slope), float(intercept), float(np.sum(residuals**2) / dof)


@dataclass
class DrrCalibration:
    slope: float
    intercept: float
    residual_var_log: float
    sample_rate_hz: int
    direct_window_ms: float = 2.5
    usable: bool = True

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_var_log": self.residual_var_log,
            "sample_rate_hz": self.sample_rate_hz,
            "direct_window_ms": self.direct_window_ms,
            "usable": self.usable,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DrrCalibration":
        return cls(**data)

    def invert(self, feature: float) -> float:
        return math.exp(self.slope * feature + self.intercept)


def drr_calibrate(
    samples,
    reference: np.ndarray,
    sample_rate_hz: int,
    direct_window_ms: float = 2.5,
    zero_slope_eps: float = 1e-9,
) -> DrrCalibration:
    """Fit the feature-to-distance map from (segment, true_distance) pairs."""
    features = [
        segment_drr_feature(seg, reference, sample_rate_hz, direct_window_ms)
        for seg, _ in samples
    ]
    distances = [d for _, d in samples]
    slope, intercept, resid = fit_log_linear(features, distances)
    usable = abs(slope) > zero_slope_eps
    return DrrCalibration(
        slope=slope,
        intercept=intercept,
        residual_var_log=resid,
        sample_rate_hz=sample_rate_hz,
        direct_window_ms=direct_window_ms,
        usable=usable,
    )


def drr_estimate(
    segment: np.ndarray,
    calibration: DrrCalibration,
    reference: np.ndarray,
    *,
    timestamp_s: float = 0.0,
) -> DistanceMeasurement:
    """Invert the calibrated fit at the segment's feature value.

    The log-space residual variance maps to meters^2 at the estimated
    distance (first-order delta method).
    """
    if not calibration.usable:
        raise EstimatorError("calibration has no usable slope")
    feature = segment_drr_feature(
        segment, reference, calibration.sample_rate_hz, calibration.direct_window_ms
    )
    distance = calibration.invert(feature)
    variance = max((distance**2) * calibration.residual_var_log, VARIANCE_FLOOR_M2)
    return DistanceMeasurement(
        distance_m=distance,
        variance_m2=variance,
        timestamp_s=timestamp_s,
        segment_len_s=len(segment) / calibration.sample_rate_hz,
    )


def fanet_estimate(
    segment: np.ndarray,
    model,
    variance_m2: float = DEFAULT_FANET_VARIANCE_M2,
    *,
    stft: StftSpec | None = None,
    timestamp_s: float = 0.0,
    sample_rate_hz: int = 16000,
) -> DistanceMeasurement:
    """Network distance: mean of the per-frame outputs over the segment."""
    spec = stft or StftSpec()
    features = stft_features(segment, spec)
    subbands = to_subbands(features, model.config.subbands)
    frames = model.forward(subbands)
    return DistanceMeasurement(
        distance_m=frames.mean_distance_m(),
        variance_m2=variance_m2,
        timestamp_s=timestamp_s,
        segment_len_s=len(segment) / sample_rate_hz,
    )


class OracleEstimator:
    """Ground-truth channel; needs no audio."""

    needs_audio = False

    def __init__(self, sigma_m: float, rng: np.random.Generator):
        if sigma_m < 0:
            raise ValueError("sigma_m must be >= 0")
        self.sigma_m = sigma_m
        self.rng = rng

    def estimate(self, segment, *, timestamp_s, true_distance_m=None, segment_len_s=0.0):
        if true_distance_m is None:
            raise EstimatorError("oracle estimator requires the true distance")
        return oracle_estimate(
            true_distance_m,
            self.sigma_m,
            self.rng,
            timestamp_s=timestamp_s,
            segment_len_s=segment_len_s,
        )


class DrrEstimator:
    needs_audio = True

    def __init__(self, calibration: DrrCalibration, reference: np.ndarray):
        self.calibration = calibration
        self.reference = np.asarray(reference, dtype=np.float64)

    def estimate(self, segment, *, timestamp_s, true_distance_m=None, segment_len_s=0.0):
        return drr_estimate(
            segment, self.calibration, self.reference, timestamp_s=timestamp_s
        )


class FanetEstimator:
    needs_audio = True

    def __init__(
        self,
        model,
        variance_m2: float = DEFAULT_FANET_VARIANCE_M2,
        stft: StftSpec | None = None,
        sample_rate_hz: int = 16000,
    ):
        self.model = model
        self.variance_m2 = variance_m2
        self.stft = stft or StftSpec()
        self.sample_rate_hz = sample_rate_hz

    def estimate(self, segment, *, timestamp_s, true_distance_m=None, segment_len_s=0.0):
        try:
            return fanet_estimate(
                segment,
                self.model,
                self.variance_m2,
                stft=self.stft,
                timestamp_s=timestamp_s,
                sample_rate_hz=self.sample_rate_hz,
            )
        except ValueError as exc:
            raise EstimatorError(str(exc)) from exc
