use thiserror::Error;

/// Errors surfaced by the library.
///
/// `Precondition` variants correspond to violated input contracts and map to
/// CLI exit code 2; the rest are reported as internal failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("index {index} out of range for custom spectrum of length {len}")]
    OutOfRange { index: u64, len: u64 },

    #[error("basis does not provide eigenfunctions: {0}")]
    UnsupportedBasis(String),

    #[error("eigenvalue fit domain: {0}")]
    FitDomain(String),

    #[error("mode outside field bounds: {0}")]
    OutOfBounds(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate system: {0}")]
    DegenerateSystem(String),

    #[error("grid too large: {0}")]
    GridTooLarge(String),

    #[error("data is not admissible: {summary}")]
    Inadmissible {
        summary: String,
        report: Box<crate::solver::AdmissibilityReport>,
    },

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("insufficient continued fraction depth: {0}")]
    InsufficientDepth(String),

    #[error("regularity restriction violated: {0}")]
    Regularity(String),

    #[error("time grid too coarse: {0}")]
    Resolution(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that signal a violated input contract.
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
