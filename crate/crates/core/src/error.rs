use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("failed to encode {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("{path}: expected an 8-bit RGB raster, found {found}")]
    NotRgb { path: PathBuf, found: String },

    #[error("invalid mask {path}: {message}")]
    InvalidMask { path: PathBuf, message: String },

    #[error("malformed PFM: {0}")]
    Pfm(String),

    #[error("malformed response curve: {0}")]
    ResponseFormat(String),

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("sample {sample}: missing {member} image")]
    MissingMember { sample: String, member: &'static str },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        found: (u32, u32),
    },

    #[error("crop window exceeds image bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("response recovery system is singular (no usable exposure variation)")]
    SingularSystem,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("non-finite cost encountered: {0}")]
    NonFiniteCost(String),

    #[error("radiance map is all zero; log-average luminance is undefined")]
    ZeroRadiance,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("sample {0} has no ground truth")]
    MissingGroundTruth(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
