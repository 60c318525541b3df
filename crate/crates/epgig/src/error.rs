use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A moment that does not exist (or has no supported evaluation route)
    /// was requested.
    #[error("unsupported moment: {0}")]
    UnsupportedMoment(String),

    /// A quadrature oracle failed to converge; test harnesses treat this as
    /// a failure of the check, never as a pass.
    #[error("oracle failure: {0}")]
    OracleFailure(String),

    /// A linear system was singular and no safe fallback exists.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Input data was malformed or inconsistent.
    #[error("data error: {0}")]
    Data(String),

    /// Requested configuration is outside the supported scope.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
