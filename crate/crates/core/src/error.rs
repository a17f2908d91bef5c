use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The request exceeds a hard enumeration or size budget.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// A matrix or model failed validation (symmetry, positive semi-definiteness).
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical procedure failed to reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An optimizer or regression failed; the message carries the best candidate.
    #[error("fitting error: {0}")]
    Fitting(String),

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
