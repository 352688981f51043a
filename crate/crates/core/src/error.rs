use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Antenna or block counts that do not describe a channel.
    #[error("invalid channel configuration: {0}")]
    Config(String),
    /// An argument lies outside the region where the operation is defined.
    #[error("{0}")]
    Domain(String),
    /// Exhaustive enumeration would exceed the supported instance size.
    #[error("enumeration budget exceeded: {0}")]
    Budget(String),
    /// A Monte Carlo estimate has too few events to be used.
    #[error("unresolved: {0}")]
    Unresolved(String),
    #[error("malformed linear program: {0}")]
    MalformedLp(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
