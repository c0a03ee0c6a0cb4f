"""
Distance network anatomy
========================

Shows the shape pipeline of the subband Filter-Attention network: a chirp
recording becomes a 4-channel spectro-temporal tensor, subband stacking
folds frequency into channels, and the network emits one nonnegative
distance per STFT frame. Parameter and MAC accounting match the lightweight
design budget (~43k stored elements).
"""

import numpy as np

from monoloc.acoustics import ChirpSpec, RoomSpec, generate_rir, render_recording, synthesize_chirp
from monoloc.fanet import FaNetConfig, build, count_macs, count_parameters, count_trainable_parameters
from monoloc.features import stft_features, to_subbands

room = RoomSpec(5.9, 6.9, 2.9, target_rt60_s=0.6)
chirp = synthesize_chirp(ChirpSpec(), duration_s=1.0, sample_rate_hz=16000)
rir = generate_rir(room, (2.0, 2.5), (3.5, 4.0), max_order=20)
recording = render_recording(chirp, rir)
segment = recording[8000 : 8000 + 3200]  # a 0.2 s steady-state window

features = stft_features(segment)
print(f"feature tensor [4, F, T] = {features.data.shape}")
subbands = to_subbands(features, 16)
print(f"subband tensor [4N, F/N, T] = {subbands.data.shape}")

config = FaNetConfig()
print(f"\nstored tensor elements: {count_parameters(config):,}")
print(f"trainable parameters:   {count_trainable_parameters(config):,}")
print(f"MACs for this window:   {count_macs(config, subbands.frame_count):,}")

model = build(config, seed=9)  # random weights: structure demo only
frames = model.forward(subbands)
print(f"\nper-frame outputs ({frames.frame_count} frames, all >= 0):")
print(np.array2string(frames.values, precision=3))
print(f"segment-level distance (mean): {frames.mean_distance_m():.3f} m")
