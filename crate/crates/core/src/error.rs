use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("defective matrix: eigenvalues {clustered:?} do not have independent eigenvectors")]
    Defective { clustered: Vec<(f64, f64)> },

    #[error("divergent time integral: exponent {re:+.3e}{im:+.3e}i does not decay")]
    Divergent { re: f64, im: f64 },

    #[error("Fock basis not closed: {0}")]
    BasisClosure(String),

    #[error("accuracy: {0}")]
    Accuracy(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
