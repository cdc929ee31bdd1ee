"""Numerical laboratory for traveling fronts of delayed nonlocal-dispersal
monostable equations: critical speeds, wave profiles, Cauchy evolution,
linearized decay formulas, and stability-rate experiments."""

from .kernels import (
    HeatKernelParams,
    Kernel,
    KernelSpec,
    MomentDivergedError,
    OrderUndeterminedError,
    SymbolOrder,
    cauchy_truncated,
    compact_bump,
    estimate_symbol_order,
    exp_moment,
    exp_moment_weighted,
    fourier_symbol,
    gaussian,
    heat_moment,
    make_kernel,
)
from .monostable import (
    ContractionConstants,
    HypothesisReport,
    Monostable,
    contraction_constants,
    preset,
    validate,
)
from .wavespeed import (
    SpeedRoots,
    WaveCharacteristics,
    WeightFunction,
    birth_curve,
    critical_pair,
    decay_roots,
    rate_bound,
    transport_curve,
    weight_eval,
    weight_switch,
)
from .profile import Profile, residual, solve_profile, tail_exponents
from .evolution import (
    FieldState,
    Grid,
    StepParams,
    check_ordering,
    convolve,
    evolve,
    initial_state,
    moving_frame_error,
    squeeze_init,
    step,
)
from .linearized import (
    DelayedExponential,
    LinearSymbols,
    ModeCoefficients,
    decay_fit,
    delayed_exp,
    fit_delay_margin,
    linear_solve_direct,
    linear_solve_formula,
    linear_symbols,
    mode_symbols,
    scalar_delayed_solution,
)
from .lab import (
    ExperimentConfig,
    StabilityReport,
    run_delay_comparison,
    run_stability,
    run_supersolution_check,
)

__version__ = "0.1.0"
