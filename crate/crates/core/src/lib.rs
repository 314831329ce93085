//! Sequential multiple testing over `K` independent data streams.
//!
//! Three families of procedures are provided, all driven by the per-stream
//! cumulative log-likelihood ratios (LLRs) of the streams:
//!
//! * the decentralized parallel SPRT, where each stream is tested on its own
//!   data only;
//! * the asynchronous gap / gap-intersection procedure, which uses a priori
//!   bounds `l <= |A| <= u` on the number of signals and compares each
//!   stream's LLR with the order statistics of all LLRs;
//! * the synchronous procedure, which stops all streams at one common time.
//!
//! Around them sit threshold calibration (closed form and Monte Carlo with
//! importance sampling), a composite-hypothesis variant based on adaptive
//! likelihood ratios, closed-form efficiency theory, a reproducible parallel
//! simulation engine and an exact enumeration oracle for Bernoulli streams.

pub mod calibration;
pub mod cli;
pub mod composite;
pub mod engine;
pub mod error;
pub mod procedures;
pub mod simulation;
pub mod statistics;
pub mod stream_models;
pub mod theory;

pub use calibration::{
    analytic_thresholds, calibrate_monte_carlo, fwe_bound, is_fwe_estimate, plain_fwe_estimate,
    CalibrationMethod, CalibrationResult, ConfigSelection, ErrorTargets, ErrorType, FweEstimate,
};
pub use composite::{CompositeGaussianModel, Estimator, ParameterInterval};
pub use engine::McSettings;
pub use error::{Error, Result};
pub use procedures::{
    run_replication, DecisionRecord, Monitor, PriorBounds, ProcedureKind, RuleFlavor, Thresholds,
};
pub use statistics::LlrState;
pub use simulation::{run_sweep, Curve, CurvePoint, SweepSpec};
pub use stream_models::{BernoulliModel, GaussianMeanModel, Model, SignalConfig, StreamModel};
pub use theory::{AreFamily, ErrorMetric, ErrorReport, RateRegime};

/// Tool version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default cap on the number of time steps of one replication.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

/// Default number of Monte Carlo replications.
pub const DEFAULT_REPLICATIONS: usize = 10_000;
