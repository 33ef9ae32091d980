use thiserror::Error;

/// Errors raised anywhere in the link simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular or not positive definite (pivot {pivot:.3e}, threshold {threshold:.3e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("bad length for {what}: expected {expected}, got {got}")]
    BadLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unsupported modulation: {0} bits per symbol (only QPSK, M = 2, is implemented)")]
    UnsupportedModulation(usize),

    #[error("spreading factor {0} is not a power of two")]
    BadSpreadingFactor(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("cyclic prefix of {cp} chips is shorter than channel memory of {memory} chips")]
    CpTooShort { cp: usize, memory: usize },

    #[error("round order violation: state is at round {state}, update is for round {update}")]
    RoundOrderViolation { state: usize, update: usize },

    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("I/O error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            reason: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
