"""Fragmentation chains killed at an exponential space-time barrier.

Exact spectral quantities of the tagged fragment, numerical scale
functions, event-driven simulation of the killed population, and a
seeded Monte Carlo harness that checks the extinction phase transition,
the largest-fragment decay rate, and the martingale mean identities.
"""

__version__ = "0.1.0"

from .levy import (  # noqa: F401
    LevyModel,
    ScaleTable,
    make_model,
    p_bar,
    phi,
    phi_prime,
    psi,
    psi_tilted,
    scale_function,
    speed_c_p,
    spine_survival_prob,
    tilted_jump_measure,
)
from .measure import (  # noqa: F401
    DislocationMeasure,
    MassPartition,
    binary_measure,
    make_dislocation_measure,
    measure_from_config,
    sample_split,
    validate_mass_partition,
)
from .martingales import (  # noqa: F401
    ExtinctionCurve,
    FunctionTable,
    Snapshot,
    additive_intrinsic,
    additive_killed,
    multiplicative,
    sandwich_check,
)
from .montecarlo import EXPERIMENTS, ExperimentConfig, ExperimentResult  # noqa: F401
from .population import Caps, Trajectory, run_killed, run_unkilled  # noqa: F401
from .spine import SpinePath, simulate_spine, spine_survival_mc  # noqa: F401
from .stats import McEstimate, isotonize_nonincreasing  # noqa: F401
