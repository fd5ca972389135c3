use thiserror::Error;

/// Errors raised across the library.
///
/// `DomainError` covers every rejected argument; the remaining variants are
/// numerical outcomes that callers are expected to report rather than retry.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("degenerate slow flow: {0}")]
    DegenerateFlow(String),

    #[error("no resonance: {0}")]
    NoResonance(String),

    #[error("no level curve: {0}")]
    NoCurve(String),

    #[error("no saddle connection: {0}")]
    NoConnection(String),

    #[error("root finding did not converge: {0}")]
    Convergence(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("inconsistent center: {0}")]
    InconsistentCenter(String),

    #[error("unsupported plane: {0}")]
    UnsupportedPlane(String),

    #[error("tangency check failed: {0}")]
    Tangency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Error {
    Error::Domain {
        op,
        msg: msg.into(),
    }
}
