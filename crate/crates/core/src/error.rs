use std::path::{Path, PathBuf};

use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("objective is not real (imaginary part {0:.3e})")]
    NonRealObjective(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("degenerate features: {0}")]
    DegenerateFeatures(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
}

impl Error {
    /// Short stable identifier, used for machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotHermitian(_) => "not_hermitian",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::InvalidShape(_) => "invalid_shape",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonRealObjective(_) => "non_real_objective",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Format(_) => "format",
            Error::DegenerateFeatures(_) => "degenerate_features",
            Error::Config(_) => "config",
            Error::Io(_) | Error::File { .. } => "io",
        }
    }

    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::File { path: path.to_path_buf(), source })
}

pub type Result<T> = std::result::Result<T, Error>;
