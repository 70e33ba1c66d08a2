"""Metropolis-adjusted integrators for Langevin dynamics.

Overdamped chains (ULA, MALA, MALTA), inertial chains built from exact
Ornstein-Uhlenbeck half-flows around a Verlet step (GLA, MAGLA), and a
strong-convergence harness that couples every integrator to a fine-grid
reference through one shared Brownian path.  Chain kernels run compiled
when the extension built, with a pure-Python fallback; see
metrolangevin._kernels.BACKEND for which one is active.
"""

from ._kernels import BACKEND, backend_name
from .models import (InertialModel, ModelError, PhaseState, PotentialModel,
                     StepOutcome, finite_difference_gradient,
                     make_polynomial_model, make_quartic_model,
                     make_quadratic_model, make_zero_model)
from .overdamped import (ChainTrace, OverdampedStepInput, in_instability_region,
                         mala_acceptance, mala_log_ratio_g, mala_step,
                         malta_acceptance, malta_drift_term, malta_log_density,
                         malta_step, run_overdamped_chain, ula_log_density,
                         ula_step)
from .inertial import (DiscreteLagrangian, InertialChainTrace, delta_e,
                       draw_ou_noise, gla_log_density, gla_step,
                       magla_acceptance, magla_step, ou_decay, ou_half_step,
                       ou_log_density, ou_variance, run_inertial_chain,
                       verlet_delta_e, verlet_lagrangian, verlet_map)
from .harness import (BrownianIncrementGrid, ConvergenceReport,
                      ConvergenceStudyConfig, ErgodicityReport, OrderFit,
                      QuadratureCdf, RejectionRateReport, StudyAbort,
                      TrajectoryBlowup, TrajectoryTable, coarse_increment,
                      coarse_increments, coarse_ou_integral, coarse_ou_integrals,
                      equilibrium_sample_1d, ergodicity_study, fit_order,
                      generate_brownian_grid, ks_distance, reference_trajectory,
                      rejection_rate_study, strong_error_study, trajectory_study)
from .rng import ROLES, RngStreamSpec, draw_gaussian_vector, stream_generator

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BrownianIncrementGrid", "ChainTrace", "ConvergenceReport",
    "ConvergenceStudyConfig", "DiscreteLagrangian", "ErgodicityReport",
    "InertialChainTrace", "InertialModel", "ModelError", "OrderFit",
    "OverdampedStepInput", "PhaseState", "PotentialModel", "QuadratureCdf",
    "ROLES", "RejectionRateReport", "RngStreamSpec", "StepOutcome",
    "StudyAbort", "TrajectoryBlowup", "TrajectoryTable", "backend_name",
    "coarse_increment", "coarse_increments", "coarse_ou_integral",
    "coarse_ou_integrals", "delta_e", "draw_gaussian_vector", "draw_ou_noise",
    "equilibrium_sample_1d", "ergodicity_study", "finite_difference_gradient",
    "fit_order", "generate_brownian_grid", "gla_log_density", "gla_step",
    "in_instability_region", "ks_distance", "magla_acceptance", "magla_step",
    "make_polynomial_model", "make_quadratic_model", "make_quartic_model",
    "make_zero_model", "mala_acceptance", "mala_log_ratio_g", "mala_step",
    "malta_acceptance", "malta_drift_term", "malta_log_density", "malta_step",
    "ou_decay", "ou_half_step", "ou_log_density", "ou_variance",
    "reference_trajectory", "rejection_rate_study", "run_inertial_chain",
    "run_overdamped_chain", "strong_error_study", "trajectory_study",
    "ula_log_density", "ula_step", "verlet_delta_e", "verlet_lagrangian",
    "verlet_map",
]
