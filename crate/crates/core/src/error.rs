use thiserror::Error;

use crate::quantity::Unit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit mismatch: {left} vs {right}")]
    UnitMismatch { left: Unit, right: Unit },

    #[error("arithmetic on an asymmetric quantity is not supported")]
    Asymmetric,

    #[error("non-finite result in {0}")]
    NonFinite(&'static str),

    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("unstable resonator: L = {length} m, R = {radius} m (need 0 < L < 2R)")]
    Unstable { length: f64, radius: f64 },

    #[error("{what} = {value} outside the valid range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("mode assignment: {0}")]
    ModeAssignment(String),

    #[error("{0}")]
    MissingLine(&'static str),

    #[error("degenerate data: {0}")]
    Degenerate(&'static str),

    #[error("fit did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("{what}: need at least {needed}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid trace: {0}")]
    Trace(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by malformed or missing input, as opposed to
    /// a computation that could not be carried out on valid input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MissingLine(_)
                | Error::Config(_)
                | Error::Trace(_)
                | Error::Io { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }

    /// Short stable code printed on stderr by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::UnitMismatch { .. } => "E_UNIT",
            Error::Asymmetric => "E_ASYMMETRIC",
            Error::NonFinite(_) => "E_NONFINITE",
            Error::NonPositive { .. } => "E_NONPOSITIVE",
            Error::Unstable { .. } => "E_UNSTABLE",
            Error::OutOfRange { .. } => "E_RANGE",
            Error::ModeAssignment(_) => "E_MODE_ASSIGNMENT",
            Error::MissingLine(_) => "E_MISSING_LINE",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::NoConvergence(_) => "E_NO_CONVERGENCE",
            Error::TooFew { .. } => "E_TOO_FEW",
            Error::Config(_) => "E_CONFIG",
            Error::Trace(_) => "E_TRACE",
            Error::Io { .. } => "E_IO",
            Error::Json(_) => "E_JSON",
            Error::Csv(_) => "E_CSV",
        }
    }
}
