use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    Dimension(String),

    #[error("shape mismatch: expected {expected} columns, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite input value at column {column}")]
    NonFiniteInput { column: usize },

    /// The decorrelation matrix left the finite range; the learning rate is
    /// too large for the scale of the data.
    #[error("decorrelation matrix diverged at sample {step} with eta = {eta}")]
    Divergence { eta: f64, step: u64 },

    #[error("detector is poisoned by an earlier divergence; reset it first")]
    Poisoned,

    #[error("learning-rate selection failed: {0}")]
    SelectionFailure(String),

    #[error("feature {feature} has zero empirical standard deviation")]
    DegenerateFeature { feature: usize },

    #[error("zero variance on diagonal entry {index}")]
    ZeroVariance { index: usize },

    #[error("anomaly window [{start}, {end}) does not fit in {rows} rows")]
    WindowBounds { start: usize, end: usize, rows: usize },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("no downsampled subset contains an anomaly")]
    NoValidSubset,

    #[error("labels contain a single class ({positives} positives, {negatives} negatives)")]
    SingleClass { positives: usize, negatives: usize },

    #[error("maximum AUC is zero; normalization undefined")]
    DegenerateAuc,

    #[error("covariance matrix is not positive semi-definite")]
    NotPositiveDefinite,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            Error::Io(err.to_string())
        } else {
            Error::Parse(err.to_string())
        }
    }
}
