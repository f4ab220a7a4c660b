use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("side required: x = {x} is a breakpoint, ask for the left or right limit")]
    SideRequired { x: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),

    #[error("integration failed at x = {x}: {reason}")]
    IntegrationFailure { x: f64, reason: String },

    #[error("non-generic pole: zero-energy Wronskian {wronskian:.3e} below threshold")]
    NonGenericPole { wronskian: f64 },

    #[error("support check failed: {0}")]
    Support(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("x = {0} is not a grid point of the field")]
    NotOnGrid(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("epsilon {eps} is below the floor {floor} (pass an override to allow it)")]
    EpsilonFloor { eps: f64, floor: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
