//! Monte Carlo sweeps, matched-error comparisons, path-wise diagnostics,
//! and the exact enumeration oracle for Bernoulli streams.

mod exact;
mod invariants;
mod oracle;
mod ratio;
mod recipes;
mod sweep;

pub use exact::{enumerate_exact, ExactDistribution, MAX_LIVE_STATES};
pub use invariants::{
    count_diagnostics, pathwise_invariants, signal_mean_increases, synchronous_peak_violations,
    CountDiagnostic, PathwiseReport,
};
pub use oracle::{
    default_oracle_cases, run_oracle_case, OracleCase, OracleReport, OracleRow, ORACLE_SIGMAS,
    RESIDUAL_WARNING,
};
pub use ratio::{
    efficiency_ratio, ratio_at, slope_diagnostics, theory_slope, time_at_error, Matching, SlopeFit,
};
pub use recipes::{default_grid, nonhomogeneous_models, recipe, Recipe, RECIPES};
pub use sweep::{
    run_sweep, Curve, CurvePoint, ErrorEstimation, EstimateMethod, SweepSpec, ErrorEstimate,
    DEFAULT_MAX_REPLICATIONS, IS_SWITCH_LEVEL, TIME_RELATIVE_SE_TARGET,
};
