use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("planarity violation: point {index} has |z| = {z:e} m in the robot frame")]
    Planarity { index: usize, z: f64 },

    #[error("image is {width}x{height}, detection needs at least {min}x{min}")]
    ImageTooSmall { width: u32, height: u32, min: u32 },

    #[error("keypoint at ({x:.1}, {y:.1}) is closer than {margin} px to the image border")]
    PatchMargin { x: f64, y: f64, margin: u32 },

    #[error("ratio test needs at least 2 train descriptors, got {0}")]
    TooFewTrainDescriptors(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("covariance has no positive eigenvalue (max = {0:e})")]
    NonPositiveCovariance(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("vocabulary file: {0}")]
    VocabularyFormat(String),

    #[error("dataset {}: {message}", path.display())]
    Dataset { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dataset(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Dataset {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
