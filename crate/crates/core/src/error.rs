use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Parameter or argument outside the support of a distribution or operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("no convergence after {iterations} iterations (gradient max-norm {grad_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("complete separation in binary response model")]
    Separation,

    #[error("singular information matrix")]
    SingularHessian,

    #[error("degenerate mixture component {component} (weight {weight:.3e})")]
    DegenerateComponent { component: usize, weight: f64 },

    #[error("{failed} of {total} bootstrap refits failed")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("data error{}: {message}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Data { row: Option<usize>, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(row: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Data {
            row,
            message: msg.into(),
        }
    }

    /// Stable short code used as the prefix on the CLI's error stream.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "E_DOMAIN",
            Error::RankDeficient { .. } => "E_RANK",
            Error::NonConvergence { .. } => "E_CONVERGENCE",
            Error::Separation => "E_SEPARATION",
            Error::SingularHessian => "E_SINGULAR",
            Error::DegenerateComponent { .. } => "E_DEGENERATE",
            Error::BootstrapFailures { .. } => "E_BOOTSTRAP",
            Error::DimensionMismatch { .. } => "E_DIMENSION",
            Error::Parse { .. } => "E_PARSE",
            Error::Data { .. } => "E_DATA",
            Error::Config(_) => "E_CONFIG",
            Error::Io(_) => "E_IO",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
