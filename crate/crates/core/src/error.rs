use thiserror::Error;

/// Errors raised by state construction, observables and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state handed to an observable is not normalized.
    #[error("state not normalized: norm^2 + tail = {total} (expected 1)")]
    NotNormalized { total: f64 },

    /// A malformed sector (wrong amplitude count, mismatched key, ...).
    #[error("invalid sector: {0}")]
    InvalidSector(String),

    /// The requested state carries no phase information.
    #[error("degenerate state: {0}")]
    Degenerate(String),

    /// A phase sensitivity blows up (zero signal slope with nonzero noise).
    #[error("sensitivity diverges: {0}")]
    Divergence(String),

    /// Mixture components share photon-number sectors.
    #[error("unsupported mixture: {0}")]
    UnsupportedMixture(String),

    /// The tridiagonal eigensolver did not converge.
    #[error("eigensolver failed to converge in sector N={0}")]
    NoConvergence(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
