use std::path::PathBuf;

use thiserror::Error;

/// Every failure the toolkit can report.
///
/// The variant name doubles as the diagnostic tag printed by the CLI, so
/// callers matching on a failure case can rely on [`Error::kind`].
#[derive(Error, Debug)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("no correspondences survived rejection")]
    NoCorrespondences,

    #[error("too few correspondence pairs: need {needed}, got {got}")]
    TooFewPairs { needed: usize, got: usize },

    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("destination cloud has no normals (required by point-to-plane)")]
    MissingNormals,

    #[error("cloud is not planar (point-to-line requires z = 0)")]
    NotPlanar,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid belief or model: {0}")]
    InvalidModel(String),

    #[error("observation has zero likelihood under the current belief")]
    ZeroLikelihood,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: unsupported PLY content: {detail}", path.display())]
    UnsupportedProperty { path: PathBuf, detail: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable name of the failure case.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyCloud => "EmptyCloud",
            Error::InvalidCloud(_) => "InvalidCloud",
            Error::InvalidTransform(_) => "InvalidTransform",
            Error::NoCorrespondences => "NoCorrespondences",
            Error::TooFewPairs { .. } => "TooFewPairs",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::MissingNormals => "MissingNormals",
            Error::NotPlanar => "NotPlanar",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidModel(_) => "InvalidModel",
            Error::ZeroLikelihood => "ZeroLikelihood",
            Error::Precondition(_) => "Precondition",
            Error::Parse { .. } => "ParseError",
            Error::UnsupportedProperty { .. } => "UnsupportedProperty",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
