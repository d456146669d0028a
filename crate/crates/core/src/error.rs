use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("homography is not invertible (det = {det:e})")]
    SingularHomography { det: f64 },

    #[error("seed pixel ({u}, {v}) is not on free floor")]
    SeedOnObstacle { u: usize, v: usize },

    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    OutOfImage {
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },

    #[error("camera {0} has no drivable mask")]
    MissingMask(String),

    #[error("goal pixel ({u}, {v}) is not drivable")]
    GoalNotDrivable { u: usize, v: usize },

    #[error("gradient undefined at ({u:.2}, {v:.2})")]
    GradientUndefined { u: f64, v: f64 },

    #[error("detection at ({u:.2}, {v:.2}) is off the drivable mask")]
    OffMask { u: f64, v: f64 },

    #[error("unknown camera {0}")]
    UnknownCamera(String),

    #[error("no route from camera {src} to camera {dst}")]
    Unreachable { src: String, dst: String },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("missing artifact {0}")]
    MissingArtifact(String),

    #[error("malformed image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
