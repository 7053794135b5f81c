//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("variable x_{var} out of range for a {dims}-dimensional signal")]
    VarOutOfRange { var: usize, dims: usize },

    #[error("time index {t} out of range for trajectory of length {len}")]
    TimeOutOfRange { t: usize, len: usize },

    #[error("empty window: interval [{lo},{hi}] at t={t} lies past the trajectory end (length {len})")]
    EmptyWindow {
        lo: usize,
        hi: String,
        t: usize,
        len: usize,
    },

    #[error("invalid interval: lo {lo} > hi {hi}")]
    InvalidInterval { lo: usize, hi: usize },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("csv schema violation at row {row}: {message}")]
    CsvSchema { row: usize, message: String },

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("requested embedding dimension {requested} exceeds numerical rank {rank}")]
    RankExceeded { requested: usize, rank: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("selection size {m} exceeds pool size {pool}")]
    SelectionTooLarge { m: usize, pool: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    MalformedFile { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
