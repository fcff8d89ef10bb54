//! Error types shared across the simulation pipeline.

use thiserror::Error;

/// Errors produced by the link simulation and its support machinery.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A waveform or trace is unusable for the requested operation
    /// (empty, flat, single-level, zero power, ...).
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    /// A configuration file or scenario description is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A loss evaluation failed during training; carries the particle
    /// position that triggered it.
    #[error("loss evaluation failed at position {position:?}: {reason}")]
    Evaluation { position: Vec<f64>, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateSignal(msg.into())
    }
}
