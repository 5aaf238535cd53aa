"""Tree-grass savanna dynamics with random fires.

A piecewise-deterministic Markov process: logistic competition between
normalized tree biomass ``w`` and grass biomass ``g``, interrupted by fires
whose rate depends on the state and which remove fixed fractions of both.
"""

from .core import (
    IntensitySpec,
    ModelParams,
    State,
    drift,
    figure_params,
    intensity,
    jump,
    jump_inverse,
    validate_params,
)
from .ensemble import (
    DensityGrid,
    EnsembleReport,
    boundary_stationary_1d,
    l1_distance,
    run_ensemble,
    stationary_estimate,
)
from .flow import FlowResult, equilibria, flow, flow_w
from .fokker_planck import evolve, stationary_fpe
from .pdmp import RngStream, Trajectory, sample_jump_time, simulate, snapshot

__version__ = "0.1.0"
