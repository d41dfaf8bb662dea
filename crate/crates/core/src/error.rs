use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular source term: u[{index}] = {value} >= 1")]
    Singularity { index: usize, value: f64 },

    #[error("stepping matrix is not positive definite")]
    SingularMatrix,

    #[error("inverse iteration did not converge after {iterations} iterations (residual {residual:e})")]
    Spectral { iterations: usize, residual: f64 },

    #[error("ensemble failed: {0}")]
    Ensemble(String),

    #[error("bound not applicable: {0}")]
    ConditionViolated(String),

    #[error("unknown config key `{key}`; valid keys: {valid}")]
    UnknownKey { key: String, valid: String },

    #[error("config value out of range: {0}")]
    Range(String),

    #[error("malformed config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Grid(_)
            | Error::UnknownKey { .. }
            | Error::Range(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            Error::Io { .. } | Error::Csv { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
