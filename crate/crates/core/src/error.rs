use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at voxel {index}")]
    NonFinite { index: usize },

    #[error("mask value {value} at voxel {index} is not binary")]
    NotBinary { index: usize, value: u8 },

    #[error("distance transform target has no foreground voxels")]
    EmptyTarget,

    #[error("mask is empty: {0}")]
    EmptyMask(&'static str),

    #[error("segmentation is empty")]
    EmptySegmentation,

    #[error("sample list is empty")]
    EmptySampleList,

    #[error("volume is constant; standard deviation is zero")]
    ConstantVolume,

    #[error("malformed header {path}: {field}: {reason}")]
    MalformedHeader {
        path: PathBuf,
        field: String,
        reason: String,
    },

    #[error("payload size mismatch in {path}: expected {expected} bytes, found {found}")]
    PayloadSizeMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("value out of range in {path}: voxel {index} = {value} ({semantic})")]
    ValueOutOfRange {
        path: PathBuf,
        index: usize,
        value: f64,
        semantic: String,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("inconsistent sample count: {0}")]
    InconsistentT(String),

    #[error("invalid manifest {path}: {reason}")]
    InvalidManifest { path: PathBuf, reason: String },

    #[error("invalid report {path}: {reason}")]
    InvalidReport { path: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),

    #[error("missing ground truth for case {0}")]
    MissingGroundTruth(String),

    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidShape(_) => "InvalidShape",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::NotBinary { .. } => "NotBinary",
            Error::EmptyTarget => "EmptyTarget",
            Error::EmptyMask(_) => "EmptyMask",
            Error::EmptySegmentation => "EmptySegmentation",
            Error::EmptySampleList => "EmptySampleList",
            Error::ConstantVolume => "ConstantVolume",
            Error::MalformedHeader { .. } => "MalformedHeader",
            Error::PayloadSizeMismatch { .. } => "PayloadSizeMismatch",
            Error::ValueOutOfRange { .. } => "ValueOutOfRange",
            Error::MissingFile(_) => "MissingFile",
            Error::InconsistentT(_) => "InconsistentT",
            Error::InvalidManifest { .. } => "InvalidManifest",
            Error::InvalidReport { .. } => "InvalidReport",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::MissingGroundTruth(_) => "MissingGroundTruth",
            Error::IoFailure { .. } => "IoFailure",
        }
    }
}
