use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied data that violates an operation's precondition.
    #[error("input error: {0}")]
    Input(String),
    #[error("decode error: {0}")]
    Decode(String),
    /// The two sides of an amalgamation order a pair of shared classes oppositely.
    #[error("amalgamation error: arity {arity} classes {first} and {second} are ordered oppositely in B1 and B2")]
    OrderConflict { arity: usize, first: u32, second: u32 },
    /// A computed result failed its own postcondition check.
    #[error("internal error: {0}")]
    Internal(String),
    /// Request exceeds a configured guard.
    #[error("refused: {0}")]
    Refused(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
