use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("sample rate mismatch: {expected} Hz vs {found} Hz")]
    RateMismatch { expected: u32, found: u32 },

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("degenerate measurement: {0}")]
    Degenerate(String),

    /// Bands that need energy but where the supporting loudspeaker has none.
    #[error("unfillable bands (support has no energy where a deficit exists): {0:?}")]
    Unfillable(Vec<usize>),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_rate(expected: u32, found: u32) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::RateMismatch { expected, found })
    }
}
