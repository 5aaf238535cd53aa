"""
One savanna trajectory
======================

Fires arrive at rate equal to the grass cover and burn 40% of the trees and
10% of the grass. The result is a sawtooth path.
"""

import numpy as np

from savanna_pdmp import RngStream, figure_params, simulate, snapshot

params = figure_params()
traj = simulate(params, (0.01, 0.2), 100.0, RngStream(seed=2019))

print(f"{len(traj.events)} fires in 100 time units")
for ev in traj.events[:5]:
    print(f"  t={ev.time:7.3f}  ({ev.pre_state.w:.4f}, {ev.pre_state.g:.4f}) -> "
          f"({ev.post_state.w:.4f}, {ev.post_state.g:.4f})")

###############################################################################
# The path is right-continuous: at a fire time it shows the burnt state.

grid = np.linspace(0, 100, 11)
for t in grid:
    x = snapshot(traj, t)
    print(f"t={t:5.1f}  w={x.w:.3e}  g={x.g:.3f}")

###############################################################################
# Fires at fixed intervals give the impulsive variant for comparison.

periodic = simulate(params, (0.01, 0.2), 100.0, RngStream(0), fire_mode="periodic", tau_fixed=2.0)
print("periodic fires every 2.0: final state", tuple(round(v, 4) for v in periodic.final_state))
