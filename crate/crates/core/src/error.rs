use alloc::string::String;

/// Failures raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("bracket endpoints have the same sign")]
    NoRoot,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("edge coefficient vanishes (|Q| or |P| below 1e-300)")]
    SingularCoefficient,
    #[error("{mass:.3e} of the probability lies outside the x-grid")]
    GridTooSmall { mass: f64 },
    #[error("quantity undefined: {0}")]
    Undefined(&'static str),
}

impl Error {
    /// True for failures of a numerical guard rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::SingularCoefficient | Error::GridTooSmall { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
