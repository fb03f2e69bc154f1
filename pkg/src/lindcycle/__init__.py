"""Periodically driven GKSL dynamics: Spohn conditions, decay rates, monodromy and limit cycles."""

from .cycles import (
    DEGENERATE,
    PERIOD_MULTIPLE,
    UNDETERMINED,
    UNIQUE_CYCLE,
    contraction_check,
    entropy_monotonicity_trace,
    entropy_monotonicity_traces,
    find_limit_cycle,
    lag_period_entropy,
    monodromy_spectrum,
    relaxing_certificate,
    spohn_windows,
)
from .errors import (
    DegenerateFixedSpaceError,
    DimensionError,
    EigenNonConvergenceError,
    ExponentRangeError,
    InvalidOperatorError,
    LindcycleError,
    NonConvergentError,
    ProtocolError,
    WindowError,
)
from .lindblad import (
    Const,
    Cos,
    DissipationChannel,
    LindbladGenerator,
    ModulatedGenerator,
    Poly,
    Pow,
    Protocol,
    Segment,
    Sin,
    analyze_span,
    diagonal_part,
    generator_superop,
    lambda_at,
    min_rate_over_window,
)
from .models import (
    ModelSpec,
    build_counterexample,
    build_driven_qubit,
    build_pi_pulse,
    build_quasiperiodic_qubit,
    build_repaired_counterexample,
    shipped_models,
)
from .operators import (
    Domain,
    SuperOp,
    eig_hermitian,
    hs_inner,
    matrix_exp,
    relative_entropy,
    subspace_inf_norm,
    superop_one_norm,
    trace_distance,
    trace_norm,
)
from .propagation import cptp_check, evolve, heisenberg_propagate, monodromy, propagate_interval

__version__ = "0.1.0"
