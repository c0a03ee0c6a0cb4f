"""
Range-only EKF convergence
==========================

Feeds noisy distance measurements from a circling microphone into the
extended Kalman filter and watches the source belief contract around the
true position. The microphone never knows directions, only ranges; motion
supplies the geometry.
"""

import math

import numpy as np

from monoloc.estimators import oracle_estimate
from monoloc.localization import SourceBelief, run_filter

true_source = np.array([2.0, 2.5])
angles = np.linspace(0.0, 2.0 * math.pi, 200, endpoint=False)
mics = np.stack([2.95 + np.cos(angles), 3.45 + np.sin(angles)], axis=1)

rng = np.random.default_rng(0)
steps = [
    (0.1 * i, mic, oracle_estimate(float(np.linalg.norm(true_source - mic)), 0.1, rng))
    for i, mic in enumerate(mics)
]

init = SourceBelief([1.0, 1.0], np.eye(2))
trace = run_filter(init, steps)

print("update   estimate              error (m)   sqrt(tr P)")
for k in (0, 1, 4, 9, 24, 49, 99, 199):
    rec = trace.records[k]
    err = np.linalg.norm(rec.belief.mean - true_source)
    spread = math.sqrt(np.trace(rec.belief.cov))
    sx, sy = rec.belief.mean
    print(f"{k + 1:6d}   ({sx:5.3f}, {sy:5.3f})     {err:8.4f}   {spread:9.4f}")

final = trace.final_belief
print(f"\ntrue source ({true_source[0]}, {true_source[1]}); "
      f"final error {np.linalg.norm(final.mean - true_source):.4f} m")
