"""
Fire-free phase portraits
=========================

Without fires, trees grow logistically and grass competes with them for the
space trees leave free. Every orbit ends at full woodland (1, 0), because
trees are never held back.
"""

import numpy as np

from savanna_pdmp import figure_params
from savanna_pdmp.flow import equilibria, phase_curves

###############################################################################
# Two rate settings: fast grass and slow trees, then the sample-path rates.

for r_w, r_g in [(0.08, 1.5), (0.25, 0.5)]:
    params = figure_params(r_w=r_w, r_g=r_g)
    print(f"r_w={r_w}, r_g={r_g}")
    for eq in equilibria(params):
        flag = " (degenerate)" if eq.degenerate else ""
        print(f"  {tuple(eq.location)}: {eq.classification}{flag}, eigenvalues {eq.eigenvalues}")

    ###########################################################################
    # Grass peaks first and then declines as trees take over.
    starts = [(0.01, 0.1), (0.01, 0.9), (0.5, 0.5)]
    for start, (t, w, g) in zip(starts, phase_curves(params, starts, 80.0, 400)):
        k = int(np.argmax(g))
        print(f"  from {start}: grass peak {g[k]:.3f} at t={t[k]:.1f}, end ({w[-1]:.3f}, {g[-1]:.3f})")

###############################################################################
# For CSV curve files suitable for plotting, use the command line:
#
#   python -m savanna_pdmp phase --figure1 --out phase/
