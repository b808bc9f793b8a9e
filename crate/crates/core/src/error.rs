use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to report the
/// failure without access to the call site.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("edge list line {line}: {message}")]
    EdgeList { line: usize, message: String },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NonUnitary { deviation: f64 },

    #[error("circuit needs {requested} qubits, over the cap of {cap} (set DETEQT_MAX_QUBITS to raise)")]
    QubitCap { requested: usize, cap: usize },

    #[error("projection retained negligible mass ({mass:.3e})")]
    ProjectionDepleted { mass: f64 },

    #[error("candidates {first} and {second} share an elimination signature and cannot be told apart")]
    Identifiability { first: String, second: String },

    #[error("detection failed: {0}")]
    DetectionFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
