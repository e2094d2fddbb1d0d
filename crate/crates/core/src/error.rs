use thiserror::Error;

pub type Result<T, E = AgdlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AgdlError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed payload at byte {offset}: {reason}")]
    MalformedPayload { offset: usize, reason: String },

    #[error("malformed bitstream at byte {offset}: {reason}")]
    MalformedBitstream { offset: usize, reason: String },

    /// H·Hᵀ is not numerically positive definite.
    #[error("sampling matrix is rank deficient ({0})")]
    RankFailure(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("image I/O: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AgdlError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AgdlError::InvalidParameter(msg.into())
    }

    pub(crate) fn payload(offset: usize, reason: impl Into<String>) -> Self {
        AgdlError::MalformedPayload {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn bitstream(offset: usize, reason: impl Into<String>) -> Self {
        AgdlError::MalformedBitstream {
            offset,
            reason: reason.into(),
        }
    }
}
