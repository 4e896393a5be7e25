"""Halpern-accelerated inexact proximal point and augmented Lagrangian methods."""

from .alm import (
    ALMConfig,
    ALMTrace,
    ConvexProgram,
    aug_lagrangian,
    dual_resolvent,
    ergodic_average,
    ergodic_bound_check,
    ergodic_bounds_exact_sums,
    inner_solve,
    multiplier_map,
    pointwise_bound_check,
    run_alm,
    thm41_bounds,
    thm42_bounds,
)
from .operators import (
    AffineOperator,
    BoxNormalCone,
    ExactResolventUnavailable,
    MonotoneOperator,
    QuadraticBoxSubdifferential,
    ResolventError,
    ResolventResult,
    ScaledIdentityPlusSkew,
    fixed_point_residual,
    resolvent,
    zero_point,
)
from .rates import (
    EnvelopeParams,
    LinearRateParams,
    beta0,
    bound_report,
    predicted_slope,
    deltak_exact,
    deltak_upper,
    exact_envelope,
    fit_rate,
    distance_envelope,
    linear_rate_check,
    theta,
    theta_envelope,
)
from .solver import (
    IterateTrace,
    ProxParamSchedule,
    SolveConfig,
    ToleranceSchedule,
    eps_schedule,
    halpern_step,
    inject_adversarial_error,
    run_hippm,
)

__version__ = "0.1.0"
