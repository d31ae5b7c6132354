"""Simulation and verification toolkit for conditioned walks driven by
products of positive random matrices."""

__version__ = "0.1.0"

from .matrices import (
    ComparabilityReport,
    ComparisonConstants,
    PositiveMatrix,
    SimplexPoint,
    act_projective,
    act_right,
    check_comparability,
    column_min_sum,
    comparability_report,
    l1_norm,
    multiply,
    size_functional,
)
from .ensembles import (
    AssumptionReport,
    CalibrationResult,
    EnsembleSpec,
    calibrate_centering,
    sample_matrix,
    validate_assumptions,
)
from .walk import (
    ExactLaw,
    WalkBatch,
    WalkConfig,
    WalkPathRecord,
    enumerate_exact,
    one_step,
    simulate_batch,
    simulate_from_states,
)
from .estimators import (
    Estimate,
    HarmonicEstimate,
    conditioned_terminal_sample,
    estimate_harmonic,
    estimate_invariant,
    estimate_local,
    estimate_lyapunov,
    estimate_sigma2,
    estimate_survival,
    estimate_window_unconditioned,
    harmonic_surface,
)
from .harness import (
    EXPERIMENTS,
    ExperimentInfo,
    VerdictReport,
    experiment_names,
    run_experiment,
)

__all__ = [
    "__version__",
    "PositiveMatrix",
    "SimplexPoint",
    "ComparisonConstants",
    "ComparabilityReport",
    "l1_norm",
    "column_min_sum",
    "size_functional",
    "multiply",
    "act_projective",
    "act_right",
    "check_comparability",
    "comparability_report",
    "EnsembleSpec",
    "CalibrationResult",
    "AssumptionReport",
    "calibrate_centering",
    "validate_assumptions",
    "sample_matrix",
    "WalkConfig",
    "WalkPathRecord",
    "WalkBatch",
    "ExactLaw",
    "simulate_batch",
    "simulate_from_states",
    "one_step",
    "enumerate_exact",
    "Estimate",
    "HarmonicEstimate",
    "estimate_lyapunov",
    "estimate_sigma2",
    "estimate_invariant",
    "estimate_survival",
    "estimate_harmonic",
    "harmonic_surface",
    "estimate_local",
    "estimate_window_unconditioned",
    "conditioned_terminal_sample",
    "VerdictReport",
    "ExperimentInfo",
    "EXPERIMENTS",
    "run_experiment",
    "experiment_names",
]
