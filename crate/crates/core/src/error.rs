use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },
    #[error("jpeg encoding failed: {0}")]
    EncodeFailure(String),
    #[error("invalid image size {width}x{height}")]
    InvalidSize { width: usize, height: usize },
    #[error("invalid jpeg quality {0}, expected 1..=100")]
    InvalidQuality(u8),
    #[error("offset ({dy}, {dx}) does not fit a {height}x{width} image")]
    OffsetTooLarge {
        dy: i32,
        dx: i32,
        height: usize,
        width: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("non-finite activation at layer {layer}")]
    NonFiniteActivation { layer: usize },
    #[error("non-finite gradient at layer {layer}")]
    NonFiniteGradient { layer: usize },
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("split `{0}` has no records")]
    EmptySplit(String),
    #[error("leave-one-category-out needs at least two gan categories")]
    SingleCategory,
    #[error("no images found under {0}")]
    EmptyDirectory(PathBuf),
    #[error("cannot infer label for {0}")]
    AmbiguousLabel(PathBuf),
    #[error("manifest line {line}: {reason}")]
    ManifestParse { line: usize, reason: String },
    #[error("duplicate manifest path {0}")]
    DuplicatePath(PathBuf),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::InvalidQuality(_) | Error::InvalidSize { .. } => ErrorClass::Usage,
            Error::NonFiniteActivation { .. } | Error::NonFiniteGradient { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
