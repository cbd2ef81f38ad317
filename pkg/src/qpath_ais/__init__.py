"""Annealed importance sampling over power-mean interpolation paths."""

from .deformed import (
    EPS_Q,
    exp_q,
    ln_q,
    log_power_mean,
    power_mean,
    verify_q_identities,
)
from .densities import (
    DensityHandle,
    GaussianSpec,
    StudentTSpec,
    make_custom,
    make_gaussian,
    make_student_t,
    nu_from_q,
    q_from_nu,
)
from .paths import (
    PartitionEstimate,
    QPath,
    Schedule,
    estimate_partition,
    grad_log_density_at,
    interpolated_member_check,
    linear_schedule,
    log_density_at,
    q_exp_form_check,
    reparameterize_beta_to_theta,
    reparameterize_theta_to_beta,
    sufficient_statistic,
)
from .divergences import (
    QuadratureGrid,
    alpha_divergence,
    check_mass_capture,
    default_grid,
    gauss_legendre_grid,
    heavy_tail_grid,
    integrate_density,
    kl_unnormalized,
    variational_objective,
)
from .hmc import HmcConfig, RngStream, hmc_transition, leapfrog
from .ais import (
    AisResult,
    BdmcResult,
    effective_sample_size,
    enumerate_discrete_ais,
    discrete_path_pmf,
    log_mean_exp,
    metropolis_kernel,
    run_ais,
    run_bdmc,
)
from .harness import (
    ExperimentConfig,
    GridRow,
    ResultRow,
    aggregate,
    run_experiment,
)

__version__ = "0.1.0"
