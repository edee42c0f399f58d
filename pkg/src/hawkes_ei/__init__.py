"""Exact simulation and stability diagnostics for a two-population
excitatory/inhibitory Hawkes process with exponential kernels."""

from .errors import (
    AssumptionViolated,
    DriftFailed,
    ExplosionGuard,
    HorizonNonPositive,
    LengthMismatch,
    NonPositiveRate,
    NotDegenerate,
    SignViolation,
    SingularC,
    SingularFit,
)
from .lyapunov import (
    LyapunovConfig,
    choose_pq,
    eval_V,
    fit_numeric_coeffs,
    generator_apply,
    quadrant_drift_coeffs,
    verify_drift,
)
from .model import (
    ModelParams,
    check_assumption_one,
    check_assumption_two,
    effective_weights,
    make_params,
    scale_params,
    spectral_radius,
    validate_params,
    weight_matrix,
)
from .simulator import (
    EventRecord,
    LiftedState,
    RngContract,
    SystemState,
    apply_jump,
    flow,
    intensities,
    simulate,
    simulate_lifted,
)

__version__ = "0.1.0"
