use thiserror::Error;

/// Errors surfaced by the mapping, prediction and planning layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({0}, {1}, {2}) is outside the map bounding box")]
    OutOfBounds(f64, f64, f64),

    #[error("grid configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("measurement time {t} precedes last track update {last}")]
    TimeRegression { t: f64, last: f64 },

    #[error("non-finite measurement")]
    InvalidMeasurement,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("planner root pose is not in known free space")]
    InvalidStart,

    #[error("tree expansion admitted no nodes within budget")]
    ExpansionStarved,

    #[error("no timed-safe path between the requested poses")]
    Unreachable,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("scenario parse error: {0}")]
    ScenarioParse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
