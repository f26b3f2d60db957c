use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image {path}: {reason}")]
    UnsupportedImage { path: PathBuf, reason: String },

    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },

    #[error("raw tensor: magic mismatch (found {found:?})")]
    MagicMismatch { found: [u8; 8] },

    #[error("raw tensor: unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("raw tensor: unsupported dtype code {0} (expected 1 = f32 little-endian)")]
    UnsupportedDtype(u8),

    #[error("raw tensor: truncated {what} (expected {expected} bytes, got {got})")]
    Truncated {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite ({context}; smallest eigenvalue estimate {min_eigenvalue:.3e})")]
    NotPositiveDefinite { context: String, min_eigenvalue: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("denoiser protocol error: {0}")]
    Protocol(String),

    #[error("manifest validation failed:\n  {}", .problems.join("\n  "))]
    Manifest { problems: Vec<String> },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure stems from bad user input rather than a runtime
    /// condition. Drives the CLI exit code (1 vs 2).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedImage { .. }
                | Error::CorruptImage { .. }
                | Error::MagicMismatch { .. }
                | Error::UnsupportedVersion(_)
                | Error::UnsupportedDtype(_)
                | Error::Truncated { .. }
                | Error::DimensionMismatch(_)
                | Error::InvalidArgument(_)
                | Error::NotPositiveDefinite { .. }
                | Error::DegenerateInput(_)
                | Error::Manifest { .. }
                | Error::Json { .. }
        )
    }
}
