use thiserror::Error;

/// Errors produced by the simulator, estimator, dataset, and surrogate layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("path index {path} out of range for {paths} paths")]
    PathOutOfRange { path: usize, paths: usize },

    #[error("angle {angle} is not on the pi/{q} quantization grid")]
    AngleOffGrid { angle: String, q: u32 },

    #[error("cannot parse device token `{token}`: {reason}")]
    ParseDevice { token: String, reason: String },

    #[error("malformed setup: {0}")]
    MalformedSetup(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    DatasetLine { line: usize, msg: String },

    #[error("expected {expected} readings at the uniform nodes, got {got}")]
    ReadingCount { expected: usize, got: usize },

    #[error("density matrix is not Hermitian within tolerance")]
    NotHermitian,

    #[error("density matrix trace is {0}, expected 1")]
    NotUnitTrace(f64),

    #[error("hamiltonian terms must pairwise commute")]
    NonCommuting,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("sequence length {len} exceeds the maximum {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
