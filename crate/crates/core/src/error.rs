use std::path::PathBuf;

use thiserror::Error;

/// Level pair as shown to users (1-based labels).
fn pair_label(pair: &(usize, usize)) -> String {
    format!("({}, {})", pair.0 + 1, pair.1 + 1)
}

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (time outside the
    /// horizon, parameter outside its box, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed or inconsistent arguments.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A sampled or ensemble system breaks a structural invariant.
    #[error("model error for level pair {}: {reason}", pair_label(.pair))]
    Model { pair: (usize, usize), reason: String },

    /// A divisor of the averaging cascade vanishes, i.e. a spectral hypothesis
    /// fails for the point system.
    #[error("hypothesis violated: f^{sigma}_{{{}}} vanishes ({reason})", pair_label(&(*.j, *.k)))]
    Hypothesis { j: usize, k: usize, sigma: i32, reason: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error in {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot load {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
