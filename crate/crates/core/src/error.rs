use thiserror::Error;

use crate::procedures::DecisionRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or mismatched dimensions.
    #[error("configuration error: {0}")]
    Config(String),

    /// A replication hit its step cap before every stream was decided.
    #[error("horizon of {horizon} steps exhausted with {undecided} undecided stream(s)")]
    HorizonExhausted {
        horizon: u64,
        undecided: usize,
        partial: Box<DecisionRecord>,
    },

    /// Monte Carlo threshold search did not reach the target window.
    #[error("calibration failed after {iterations} iterations: offset bracket [{lo}, {hi}], max error ratio at hi = {ratio_hi}")]
    CalibrationFailed {
        iterations: usize,
        lo: f64,
        hi: f64,
        ratio_hi: f64,
    },

    /// A sweep replication failed; names the procedure, configuration and grid point.
    #[error("{kind} under {config} at free parameter {free_parameter}: {source}")]
    SweepPoint {
        kind: String,
        config: String,
        free_parameter: f64,
        source: Box<Error>,
    },

    #[error("numerical error in stream {stream}: {message}")]
    Numerical { stream: usize, message: String },

    /// Exhaustive enumeration would exceed its size guard.
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
