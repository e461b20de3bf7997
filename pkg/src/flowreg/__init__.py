"""flowreg: closed-form generative-model drifts and their numerics.

Velocity fields, scores, and posterior quantities for tractable targets
under Gaussian-mixture interpolation paths; Euler samplers on geometric
time grids with exact Gaussian laws for linear drifts; exact Wasserstein
metrics; regularity profiles; and Lipschitz transport certificates with
functional-inequality audits.
"""

from . import bessel_sphere, driftfield, grids, metrics, regularity, schedules, targets, transport
from .schedules import (
    Schedule,
    ScheduleValues,
    by_name,
    eval_schedule,
    lipman_linear,
    rescaled_diffusion,
    stochastic_interpolant,
    terminal_exponent,
    validate_assumptions,
)
from .targets import (
    GaussianMixture1D,
    IsotropicGaussian,
    PosteriorSummary,
    Quadrature1D,
    SphereUniform,
    beta_half_reference,
    posterior,
    sample,
    second_moment,
)
from .driftfield import (
    DriftEvaluation,
    evaluate,
    reverse_sde_drift,
    velocity,
    velocity_jacobian,
    velocity_time_derivative,
)
from .grids import (
    GaussianLaw,
    GeometricGrid,
    build_geometric_grid,
    early_stopping_bound,
    euler_maruyama_exact,
    euler_ode,
    propagate_affine_law,
    select_tau,
)
from .metrics import w2_empirical_1d, w2_empirical_assignment, w2_gaussian_isotropic
from .regularity import RegularityProfile, exponent_fit, integral_lambda_max, profile
from .transport import integrate_flow, lipschitz_certificate, poincare_audit

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
