use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied parameter (density out of range, degenerate
    /// lattice, mismatched grids, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A requested object exceeds a configured capacity cap (ensemble too
    /// large, hierarchy degree too deep).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// An iterative solver or quadrature failed to reach its target.
    #[error("numerical error: {msg} (residual {residual:.3e})")]
    Numerical { msg: String, residual: f64 },

    /// Quadrature or data range is too coarse for the requested quantity.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub fn numerical(msg: impl Into<String>, residual: f64) -> Self {
        Error::Numerical { msg: msg.into(), residual }
    }

    pub fn resolution(msg: impl Into<String>) -> Self {
        Error::Resolution(msg.into())
    }
}
