use thiserror::Error;

/// Errors raised by the steady-state engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("no convergence: {message} (best residual {best_residual:.3e})")]
    Convergence { message: String, best_residual: f64 },

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("unstable drift: {0}")]
    Instability(String),

    #[error("step size underflow at t = {time:.4}: {message}")]
    Stiffness { time: f64, message: String },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
            Error::Convergence { .. } => 3,
            Error::Consistency(_) => 4,
            Error::Capacity(_) => 5,
            Error::Instability(_) | Error::Stiffness { .. } => 6,
            Error::LinearAlgebra(_) => 7,
            Error::Io(_) | Error::Csv(_) => 8,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub(crate) fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }
}
