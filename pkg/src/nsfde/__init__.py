"""Particle methods for distribution-dependent neutral stochastic
functional differential equations.

The library covers four concerns: the discretized segment space and its
partial orders (:mod:`nsfde.segments`), empirical measures with exact
Wasserstein-2 machinery (:mod:`nsfde.measures`), coefficient families with
sampling-based assumption checkers (:mod:`nsfde.coefficients`), the
frozen-flow Euler scheme and Picard-in-distribution iteration
(:mod:`nsfde.solver`), and order-preservation diagnostics on coupled runs
(:mod:`nsfde.order_monitor`).  The ``nsfde`` command line (see
:mod:`nsfde.cli`) binds them into reproducible, config-driven experiments.
"""

__version__ = "0.1.0"

from .coefficients import (
    CheckReport,
    CoefficientSet,
    CompensatedLinearDiffusion,
    Diffusion,
    Drift,
    LaggedLinearDiffusion,
    LinearLagNeutral,
    MeanFieldLinearDrift,
    NeutralTerm,
    SegmentSampler,
    ShiftedDrift,
    ZeroNeutral,
    check_comparison_conditions,
    check_diffusion_lipschitz_uniform,
    check_diffusion_structure,
    check_drift_lipschitz,
    check_growth_at_zero,
    check_neutral_contraction,
    check_neutral_contraction_uniform,
    check_neutral_monotone,
    mean_field_linear_family,
)
from .measures import (
    Ensemble,
    ensemble_from_csv,
    ensemble_to_csv,
    second_moment,
    stochastically_leq,
    w2,
    w2_bruteforce,
)
from .order_monitor import (
    CrossingReport,
    Diagnosis,
    OrderVerdict,
    ShiftResult,
    check_crossing_precedence,
    crossing_times,
    drift_shift_experiment,
    localize_violation,
    order_report,
)
from .segments import (
    BracketError,
    GridMismatchError,
    OrderKind,
    Segment,
    common_lower_constant,
    comp_sup_norm,
    compare,
    compensated_component,
    compensated_constant,
    compensated_state,
    constant_segment,
    leq,
    leq_compensated,
    ll,
    lower_companion,
    lt,
    lt_compensated,
    meet,
    ones_segment,
    segment_from_csv,
    segment_to_csv,
    shift_component_to_match,
    sup_norm,
    zero_segment,
)
from .solver import (
    Diagnostics,
    FixedPointError,
    MeasureFlow,
    NoisePlan,
    PairedPaths,
    PathSet,
    SimGrid,
    coupled_simulate,
    euler_step,
    initial_ensemble,
    picard,
    solve_frozen,
)
