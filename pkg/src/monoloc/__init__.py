"""monoloc: sound source localization with a single moving microphone.

Distance to a stationary source is estimated from reverberant audio (either a
lightweight subband Filter-Attention network, a calibrated direct-to-
reverberant regression, or a ground-truth oracle) and fused online by a
range-only extended Kalman filter. A simulation harness provides rooms,
image-source impulse responses, chirp excitation, and robot trajectories.
"""

from . import acoustics, estimators, fanet, features, harness, localization

__version__ = "0.1.0"

__all__ = [
    "acoustics",
    "estimators",
    "fanet",
    "features",
    "harness",
    "localization",
]
