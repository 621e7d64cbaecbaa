use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("lane {lane} of length {road_length} m cannot hold a single vehicle")]
    EmptyLane { lane: usize, road_length: f64 },

    #[error("no vehicle inside the RSU field of view")]
    NoCandidate,

    #[error("path delay {delay:e} s does not fit in the {taps}-tap window")]
    TapWindow { delay: f64, taps: usize },

    #[error("echo delay {delay:e} s exceeds the chirp duration {chirp:e} s")]
    ChirpWindow { delay: f64, chirp: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("resampling factor {0} < 1 would require extrapolation")]
    Extrapolation(f64),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{aborted} of {total} drops aborted")]
    TooManyAborted { aborted: usize, total: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
