"""Long-memory processes from superposed, interacting self-exciting jumps."""

from .closedform import (
    ModelKind,
    ModelParams,
    StationaryStats,
    hurst_exponent,
    load_params,
    nominal_stats,
    nondimensionalize,
    stationary_stats,
    superposed_acf,
    superposed_jump_rate,
    superposed_mean,
    superposed_skewness_mf,
    superposed_variance,
)
from .measures import (
    DiracMixture,
    DiscreteMixture,
    GammaMixture,
    JumpMeasure,
    RGrid,
    acf_kernel,
    discretize,
    inv_speed_mass,
    moment,
)

__version__ = "0.1.0"
