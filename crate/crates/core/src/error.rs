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
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("mesh has no vertices")]
    NoVertices,
    #[error("mesh has no triangles")]
    NoTriangles,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sight-line direction is parallel to the Y axis; azimuth is undefined")]
    DegenerateAzimuth,
    #[error("points are coincident")]
    CoincidentPoints,
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("timestamps not strictly increasing at sample {0}")]
    NonMonotonicTime(usize),
    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no fixations for pose {0}")]
    NoFixationsForPose(String),
    #[error("pose ids differ between ground truth and prediction: {0}")]
    PoseMismatch(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
