"""Pseudo-spectral simulator for the stochastic hyperbolic Keller-Segel
equation on the periodic torus, with Monte Carlo drivers for probing
noise-induced regularization."""

__version__ = "0.1.0"

from .spectral import (
    SpectralError,
    SpectralField,
    TorusGrid,
    bessel_multiplier,
    constant_field,
    dealias,
    field_from_coeffs,
    forward_transform,
    galerkin_project,
    gradient,
    inverse_transform,
    l2_inner,
    single_mode_field,
    sobolev_norm,
    w1inf_norm,
    zero_field,
)
from .dynamics import (
    CutoffSpec,
    LinearNoise,
    NoiseModel,
    NonlinearNoise,
    ZeroNoise,
    cutoff_theta,
    diffusion_coefficient,
    drift,
    drift_divergence_form,
    helmholtz_solve,
    truncated_drift,
)
from .integrator import (
    Constant,
    InitialCondition,
    NonFiniteStepError,
    RandomSobolev,
    SingleMode,
    SolverConfig,
    TrajectoryRecord,
    TrajectoryStatus,
    TransformComparison,
    brownian_increment,
    doss_sussmann_mu,
    em_step,
    path_stream,
    random_pde_step,
    realize_initial,
    run_trajectory,
    transform_compare,
)
from .experiments import (
    KappaEstimate,
    McReport,
    ScanEntry,
    SmallDataBound,
    StudyAbortError,
    estimate_kappa,
    gbm_moment_check,
    log_energy_drift,
    monte_carlo_survival,
    run_ensemble,
    spectral_convergence,
    temporal_convergence,
    theory_survival_bound,
    threshold_scan,
    wilson_interval,
)
from .config import ConfigError, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
