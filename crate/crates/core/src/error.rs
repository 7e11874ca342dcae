use thiserror::Error;

/// Failures raised by the torus, construction, verification and measure layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not unimodular: determinant {0}")]
    NotUnimodular(i64),

    #[error("matrix is not hyperbolic: eigenvalue {0} has modulus within tolerance of 1")]
    NotHyperbolic(f64),

    #[error("unsupported matrix: {0}")]
    UnsupportedMatrix(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("point at distance {distance} from chart center is outside the chart")]
    OutOfChart { distance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameters inconsistent: {0}")]
    Inconsistent(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("search cap exceeded: {0}")]
    SearchCap(String),

    #[error("operation not supported for variant {0}")]
    UnsupportedVariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Whether the failure stems from floating-point work or a resource budget
    /// rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Budget(_) | Error::SearchCap(_) | Error::NonFinite(_))
    }
}
