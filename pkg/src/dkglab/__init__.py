"""dkglab: pseudospectral lab for the Dirac-Klein-Gordon system, the cubic
nonlinear Dirac equation, their rank-N density-matrix variants, and the
strong-coupling/large-mass convergence experiments relating them."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config_text
from .dirac import (
    ALPHA,
    BETA,
    DensityBundle,
    InteractionMatrix,
    densities,
    density_time_derivatives,
    dirac_apply,
    dt_rho_s,
    free_propagate,
)
from .evolvers import (
    BlowUpError,
    DKGSystemState,
    NLDState,
    StepReport,
    Trajectory,
    dkg_step,
    dkg_step_instantaneous,
    error_metric,
    evolve,
    nld_step,
    substitute_instantaneous,
)
from .grid import TorusGrid, synthesize_rough_field
from .kleingordon import (
    Couplings,
    KGState,
    ReducedState,
    from_reduced,
    instantaneous_fields,
    kg_driven_step,
    kg_homogeneous_step,
    oscillatory_split,
    q_sources,
    to_reduced,
)
from .manybody import (
    DensityMatrix,
    density_regularity_check,
    diff_hs_norm,
    gamma_densities,
    gram_matrix,
    hs_norm,
    manybody_dkg_step,
    manybody_nld_step,
)
from .sweep import RateFit, SweepResult, fit_rate, run_manybody_sweep, run_sweep

__version__ = "0.1.0"
