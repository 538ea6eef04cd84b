"""targetq: tabular Q-learning with frozen Bellman targets, pluggable
target-update schedules, a closed-form schedule designer, and a stochastic
grid benchmark."""

__version__ = "0.1.0"

from .errors import (
    AlignmentError,
    ConfigValidationError,
    DegenerateDesignWarning,
    DimensionError,
    DomainError,
    IterationLimitError,
    ScheduleOverflowError,
    ValidityRegimeWarning,
)
from .gridworld import (
    GridSpec,
    build_grid_mdp,
    build_gridworld,
    dump_grid_spec,
    gridworld_spec,
    load_grid_spec,
)
from .harness import (
    AggregateStats,
    Arm,
    ExperimentConfig,
    aggregate,
    emit_csv,
    read_csv_rows,
    run_experiment,
)
from .learner import (
    CycleRecord,
    EpsilonGreedyTrajectory,
    RunTrace,
    StepOutcome,
    TdErrorTracker,
    UniformStateAction,
    inner_sgd_step,
    run_accuracy_triggered_q,
    run_geometric_q,
    run_inner_loop,
    run_periodic_q,
)
from .mdp import (
    RewardDistribution,
    SampledTarget,
    TabularMdp,
    evaluate_greedy,
    exact_bellman_apply,
    greedy_state_values,
    new_q_table,
    sample_bellman_target,
    sample_transition,
    sup_distance,
    value_iteration_oracle,
)
from .schedules import (
    AccuracyTriggered,
    ConstantStepSize,
    CustomStepSize,
    DesignOutput,
    ExplicitPeriod,
    FixedPeriod,
    GeometricPeriod,
    RateConstants,
    SummabilityDiagnostic,
    TheoryInverseStepSize,
    UnrollResult,
    compute_constants,
    design_fixed_period,
    design_growing_period,
    geometric_period,
    schedule_cost,
    summability_check,
    unroll_error_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]
