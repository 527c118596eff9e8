use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter, outcome or trade left the domain where the family is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Malformed or out-of-domain configuration, rejected before anything runs.
    #[error("config error: {0}")]
    Config(String),

    #[error("corrupt trade log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::CorruptLog { .. } => 2,
            Error::Domain(_) | Error::Convergence(_) | Error::Unsupported(_) => 3,
            Error::Io(_) => 4,
        }
    }
}
