use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular value decomposition failed to converge ({rows}x{cols})")]
    SvdFailed { rows: usize, cols: usize },

    /// The two summands of a direct sum nearly intersect.
    #[error("degenerate direct sum: operator norm of projector product {norm:.6} is not below 1 - 1e-6")]
    DegenerateSum { norm: f64 },

    /// A premise required by a certificate construction does not hold.
    #[error("premise violated: {what} = {measured:.6} (limit {limit})")]
    PremiseViolation {
        what: String,
        measured: f64,
        limit: f64,
    },

    /// Zero-based position of the first input that lies in the span of the earlier ones.
    #[error("rank-deficient input: element {} (1-based) is dependent on its predecessors", index + 1)]
    RankDeficient { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("problem size {size} exceeds cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },

    #[error("generation failed after {attempts} attempts: {reason}")]
    GenerationFailed { attempts: usize, reason: String },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
