"""Consensus-based optimization for objectives with several global
minimizers, with per-particle weighted consensus points, verification
diagnostics, and a 1D mean-field cross-check solver."""

from .objectives import (
    Ball,
    Box,
    EvalCounter,
    MinimizerSet,
    ObjectiveSpec,
    Singleton,
    BUILTIN_NAMES,
    check_assumption_lower,
    check_assumption_upper,
    dist_to_set,
    dist_to_set_batch,
    evaluate,
    evaluate_batch,
    make_builtin,
    nearest_minimizer,
    nearest_minimizer_batch,
    project,
)
from .consensus import (
    AdaptiveProduct,
    Ensemble,
    Polarized,
    StandardGibbs,
    VShifted,
    consensus_all,
    consensus_point,
    exponent,
    make_ensemble,
    validate_kernel,
)
from .dynamics import (
    DivergenceError,
    DynamicsConfig,
    Explicit,
    GaussianIID,
    NoiseStreams,
    RunRecord,
    UniformBox,
    init_ensemble,
    run,
    step,
    step_classic,
)
from .diagnostics import (
    GapRegression,
    LaplaceCheckInput,
    ball_mass_lower,
    check_exponent_gap,
    consensus_gap_stats,
    estimate_v0,
    exponent_gap_slack,
    fit_exponential_rate,
    laplace_bound_check,
    phi_test,
    two_region_laplace_check,
    v_functional,
    wasserstein1_1d,
)
from .meanfield import (
    DensityField,
    FPParams,
    Grid1D,
    cfl_dt,
    fp_step,
    init_density,
    run_fp,
    v_alpha_grid,
)
from .config import ConfigError, ExperimentConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "Box",
    "EvalCounter",
    "MinimizerSet",
    "ObjectiveSpec",
    "Singleton",
    "BUILTIN_NAMES",
    "check_assumption_lower",
    "check_assumption_upper",
    "dist_to_set",
    "dist_to_set_batch",
    "evaluate",
    "evaluate_batch",
    "make_builtin",
    "nearest_minimizer",
    "nearest_minimizer_batch",
    "project",
    "AdaptiveProduct",
    "Ensemble",
    "Polarized",
    "StandardGibbs",
    "VShifted",
    "consensus_all",
    "consensus_point",
    "exponent",
    "make_ensemble",
    "validate_kernel",
    "DivergenceError",
    "DynamicsConfig",
    "Explicit",
    "GaussianIID",
    "NoiseStreams",
    "RunRecord",
    "UniformBox",
    "init_ensemble",
    "run",
    "step",
    "step_classic",
    "GapRegression",
    "LaplaceCheckInput",
    "ball_mass_lower",
    "check_exponent_gap",
    "consensus_gap_stats",
    "estimate_v0",
    "exponent_gap_slack",
    "fit_exponential_rate",
    "laplace_bound_check",
    "phi_test",
    "two_region_laplace_check",
    "v_functional",
    "wasserstein1_1d",
    "DensityField",
    "FPParams",
    "Grid1D",
    "cfl_dt",
    "fp_step",
    "init_density",
    "run_fp",
    "v_alpha_grid",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "__version__",
]
