use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {0} is degenerate (norm <= 1e-14)")]
    DegenerateColumn(usize),

    #[error("invalid Dirac mixture: {0}")]
    InvalidMixture(String),

    #[error("every lattice node has zero density")]
    ZeroDensity,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("degenerate update: every component has zero likelihood")]
    DegenerateUpdate,

    #[error("resultant vector is near zero (norm {0:e})")]
    NearZeroResultant(f64),

    #[error("state and noise are antipodal; their sum has no direction")]
    AntipodalSum,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("objective callback failed: {0}")]
    Callback(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Error {
    Error::Domain { op, msg: msg.into() }
}
