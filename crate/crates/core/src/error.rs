use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error("sparse construction error: entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("Newton iteration did not converge in {iterations} iterations (residual trace {trace:?})")]
    NewtonFailure { iterations: usize, trace: Vec<f64> },

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("meshes are not nested: coarse divisions {coarse}, fine divisions {fine}")]
    NotNested { coarse: usize, fine: usize },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Validation failures for meshes, parameters and configuration input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    InvalidDimension(usize),
    #[error("mesh divisions must be at least {min}, got {found}")]
    InvalidDivisions { min: usize, found: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("cannot parse value `{value}` for key `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("anisotropy axis {0:?} is not a unit vector")]
    NonUnitAxis([f64; 3]),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expression error: {0}")]
    Expression(String),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
