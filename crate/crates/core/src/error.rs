use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failed in {context}: partial value {partial:e}, estimated error {error_estimate:e}")]
    QuadratureFailure { context: String, partial: f64, error_estimate: f64 },

    #[error("ellipticity violated at grid point {point:?}: {detail}")]
    Ellipticity { point: Vec<usize>, detail: String },

    #[error("operator dimension {size} exceeds spectral budget {budget}")]
    Capacity { size: usize, budget: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn io_error(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}
