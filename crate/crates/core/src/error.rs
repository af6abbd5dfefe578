use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid resolution: {0}")]
    InvalidResolution(String),

    #[error("size mismatch: expected {expected} samples, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("fields live on different meshes")]
    MeshMismatch,

    #[error("exponent p = {0} must satisfy p > 1")]
    InvalidExponent(f64),

    #[error("theta = {theta} must exceed p = {p}")]
    ThetaNotAboveP { theta: f64, p: f64 },

    #[error("dictionary is empty")]
    EmptyDictionary,

    #[error("direction is identically zero")]
    ZeroDirection,

    #[error("no sign change of the Nehari equation in [1e-8, 1e8]")]
    NoSignChange,

    #[error("operation requires an annulus mesh")]
    NotAnnulus,

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("time step fell below dt_min = {0:e}")]
    DtUnderflow(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("malformed mesh dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
