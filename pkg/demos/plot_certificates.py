"""
Checking the stability ingredients numerically
==============================================

Three grid checks: the drift of V = -log w - log g near the origin, linear
independence after two fires, and steering into a ball by flows and fires.
"""

import numpy as np

from savanna_pdmp import figure_params
from savanna_pdmp.verify import (
    condition_k_determinants,
    find_delta,
    hasminskii_value,
    reach_ball,
    unstable_manifold_point,
)

params = figure_params()

for x in [(1e-6, 1e-6), (0.1, 0.1), (0.5, 0.5), (1.0, 1.0)]:
    print(f"LV{x} = {hasminskii_value(params, x):+.4f}")

report = find_delta(params)
print(f"LV <= {report.threshold} on the ball of radius {report.delta:.4f}")

###############################################################################
# Determinant of the two displacement directions at random points.

pts = np.random.default_rng(0).uniform(0.01, 1, (10_000, 2))
dets = condition_k_determinants(params, pts[:, 0], pts[:, 1])
print(f"determinant range: [{dets.min():.2e}, {dets.max():.2e}]")

###############################################################################
# A steering schedule from nearly full cover to the unstable curve of (0, 1).

target = unstable_manifold_point(params)
sched = reach_ball(params, (0.99, 0.99), target, epsilon=0.05)
print(f"target {tuple(round(v, 4) for v in target)}: {sched.n} fires, "
      f"final distance {sched.distance:.2e}")
