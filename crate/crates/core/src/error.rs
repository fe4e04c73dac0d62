use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The transition kernel or reward is not a valid MDP component.
    #[error("invalid model: {0}")]
    Model(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A computation would exceed its configured size cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A theoretical precondition does not hold for the given parameters.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("layout error at line {line}: {message}")]
    Layout { line: usize, message: String },

    #[error("not implemented: {0}")]
    NotImplemented(&'static str),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
