use std::path::PathBuf;

/// Shape of a plane as `(height, width)`.
pub type Shape = (usize, usize);

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("plane shape must be at least 1x1, got {height}x{width}")]
    EmptyShape { height: usize, width: usize },

    #[error("expected {expected} values for a {height}x{width} plane, got {found}")]
    LengthMismatch {
        height: usize,
        width: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value {value} at (row {row}, col {col})")]
    NonFinite { row: usize, col: usize, value: f32 },

    #[error("negative depth {value} at (row {row}, col {col})")]
    NegativeDepth { row: usize, col: usize, value: f32 },

    #[error("{context}: shape mismatch, {left:?} vs {right:?}")]
    ShapeMismatch {
        context: &'static str,
        left: Shape,
        right: Shape,
    },

    #[error("{dimension} {size} is not divisible by pooling factor {factor}")]
    NotDivisible {
        dimension: &'static str,
        size: usize,
        factor: usize,
    },

    #[error("factor must be at least 1")]
    ZeroFactor,

    #[error("invalid camera intrinsics: {0}")]
    Intrinsics(String),

    #[error("kernel size must be odd and at least 3, got {0}")]
    KernelSize(usize),

    #[error("affinity field: {0}")]
    Affinity(String),

    #[error("sigma must be positive and finite, got {0}")]
    Sigma(f32),

    #[error(
        "affinity field is not normalized at (row {row}, col {col}): neighbor weight sum {sum} exceeds 1"
    )]
    Unnormalized { row: usize, col: usize, sum: f64 },

    #[error("invalid dilation schedule: {0}")]
    Schedule(String),

    #[error("prediction {value} at (row {row}, col {col}) is not positive where ground truth is valid")]
    NonPositivePrediction { row: usize, col: usize, value: f32 },

    #[error("depth {value} m at (row {row}, col {col}) exceeds the max encodable {max} m")]
    DepthOutOfRange {
        row: usize,
        col: usize,
        value: f32,
        max: f32,
    },

    #[error("plane container: {0}")]
    Container(String),

    #[error("benchmark: {0}")]
    Bench(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: truncated, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    #[error("{path}: calibration: {message}")]
    Calibration { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
