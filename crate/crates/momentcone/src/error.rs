//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("model error: {0}")]
    Model(String),

    /// A closed-form moment was requested for a (model, powers, set)
    /// combination that has no implemented closed form. This is a normal
    /// outcome, not a failure.
    #[error("analytic moment unavailable: {0}")]
    Unavailable(String),

    /// The model contains a diffuse component; it has no atomic samples.
    #[error("model is diffuse: analytic moments only")]
    Diffuse,

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
