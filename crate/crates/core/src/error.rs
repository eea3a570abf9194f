use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain violation: {0}")]
    ParameterDomain(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("torus point is not regular: {0}")]
    NotRegular(String),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
