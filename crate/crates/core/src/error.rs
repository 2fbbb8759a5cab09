use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical consistency violated: imaginary residue {residue:e} exceeds bound {bound:e}")]
    ImaginaryResidue { residue: f64, bound: f64 },

    #[error("bin ({row},{col}) system is not positive definite (non-finite input?)")]
    NotPositiveDefinite { row: usize, col: usize },

    #[error("dense system too large: {0} unknowns per sample exceeds the 4096 guard")]
    TooLarge(usize),

    #[error("tracking lost: {0}")]
    TrackingLost(String),
}

impl Error {
    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
