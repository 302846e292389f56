"""Reflected Ornstein-Uhlenbeck processes: closed-form boundary rates,
variances, and Monte Carlo verification of the idle-process CLT/FCLT."""

from .analytic import (
    RateAndVariance,
    StationaryLaw,
    asymptotic_variance,
    boundary_rate,
    doubly_loss_rate,
    generator_residual,
    h_prime,
    h_value,
    mills_ratio,
    normal_cdf,
    normal_pdf,
    rate_and_variance,
    stationary_law,
    stationary_mean,
    weight_W,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    default_config,
    load_config,
    run_experiment,
    write_report,
)
from .model import (
    BoundarySpec,
    OUParams,
    ReflectedPath,
    validate_boundary,
    validate_params,
    validate_path,
)
from .simulate import (
    BatchResult,
    SimConfig,
    batch_simulate,
    path_seed,
    reflect_step,
    simulate_path,
)
from .stats import (
    ScaledIdleSample,
    empirical_cdf,
    ergodic_tau2_estimate,
    increment_covariance,
    ks_distance,
    scaled_idle_process,
)

__version__ = "0.1.0"
