use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported PGM magic {0:?}, expected \"P5\"")]
    UnsupportedMagic(String),
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("PGM maxval {0} exceeds 255")]
    MaxvalTooLarge(u32),
    #[error("truncated PGM pixel data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("rect {rect} does not fit inside a {width}x{height} image")]
    RectOutOfBounds {
        rect: String,
        width: usize,
        height: usize,
    },
    #[error("image is {width}x{height}, at least {min}x{min} required")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid thresholds: low {low} must be positive and below high {high}")]
    InvalidThresholds { low: f64, high: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is not symmetric (|a[{row}][{col}] - a[{col}][{row}]| = {diff:e})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unknown expression label {0:?}")]
    UnknownLabel(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    AtPath {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_path(self, path: impl Into<PathBuf>) -> Error {
        Error::AtPath {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
