use thiserror::Error;

#[derive(Debug, Error)]
pub enum LampError {
    #[error("dimension mismatch: expected {expected}-D coordinates, found {found}-D")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least two distinct sites to span a region")]
    DegenerateRegion,

    #[error("requested {requested} centers but only {available} distinct sites exist")]
    TooManyCenters { requested: usize, available: usize },

    #[error("empty kernel window: no sample has weight above {threshold}")]
    EmptyKernelWindow { threshold: f64 },

    #[error("bandwidth too small for data density (h = {bandwidth})")]
    BandwidthTooSmall { bandwidth: f64 },

    #[error("design matrix is rank deficient; collinear column(s): {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("covariance matrix is not positive semidefinite")]
    NotPositiveSemidefinite,

    #[error("length mismatch: {what} has {found} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("zero-variance feature `{0}`")]
    ZeroVarianceFeature(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LampError {
    /// True for failures of the numerics rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LampError::RankDeficient { .. }
                | LampError::NotPositiveSemidefinite
                | LampError::BandwidthTooSmall { .. }
                | LampError::EmptyKernelWindow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, LampError>;
