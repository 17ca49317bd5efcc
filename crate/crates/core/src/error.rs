use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid vessel model: {0}")]
    InvalidModel(String),

    #[error("vessel model diverged: non-finite {field}")]
    Divergence { field: &'static str },

    #[error("run aborted: {0}")]
    Aborted(String),

    #[error("invalid reference path: {0}")]
    InvalidPath(String),

    #[error("query point ({x:.3}, {y:.3}) lies in an occupied cell")]
    InCollision { x: f64, y: f64 },

    #[error("query point ({x:.3}, {y:.3}) lies outside the occupancy grid")]
    OutOfBounds { x: f64, y: f64 },

    #[error("invalid occupancy grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate Gaussian width: sigma_x = {sigma_x}, sigma_y = {sigma_y}")]
    DegenerateSigma { sigma_x: f64, sigma_y: f64 },

    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid obstacle track `{id}`: {reason}")]
    InvalidTrack { id: String, reason: String },

    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Scenario(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("trajectory log: {0}")]
    TrajectoryLog(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
