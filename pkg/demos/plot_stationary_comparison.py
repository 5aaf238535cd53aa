"""
Long-run law: particles against the density equation
====================================================

Two independent routes to the long-run distribution. One is an ensemble of
simulated trajectories. The other is a finite-volume solution of the
density equation. With the sample-path parameters both put the mass against
the tree-free edge, and this script shows why.
"""

import math

import numpy as np

from savanna_pdmp import figure_params, stationary_fpe
from savanna_pdmp.ensemble import boundary_stationary_1d, l1_distance, run_ensemble

params = figure_params()

###############################################################################
# Grass on the tree-free line settles into its own stationary law.

boundary = boundary_stationary_1d(params, burn_in=300.0, n_samples=20_000)
mean_g = boundary.mean()
print(f"mean grass cover without trees: {mean_g:.3f}")

###############################################################################
# Can rare trees invade that grassland? Near w = 0, log w grows at rate r_w
# between fires and drops by log(1 - M_w) at each fire. Fires come at rate
# g there.

invasion = params.r_w + math.log1p(-params.M_w) * mean_g
print(f"long-run growth rate of log w near w = 0: {invasion:+.3f}")

###############################################################################
# Negative: trees die out, and the ensemble piles up in the first column.

rep = run_ensemble(params, (0.1, 0.2), n=20_000, times=[50.0, 200.0], grid=(32, 32))
for t, grid in zip(rep.times, rep.grids):
    col = grid.cell_masses().sum(axis=0)
    print(f"t={t:5.0f}: mass in w < 1/32 is {col[0]:.3f}")

###############################################################################
# The upwind scheme smears that singular limit over several columns, so
# the two stationary estimates disagree here while their transients agree.

fpe = stationary_fpe(params, (32, 32), residual_tol=1e-7)
cols = fpe.grid.cell_masses().sum(axis=0)
print("FPE column masses:", np.round(cols[:5], 3))
print(f"L1(ensemble at t=200, FPE steady state) = {l1_distance(rep.grids[-1], fpe.grid):.3f}")
