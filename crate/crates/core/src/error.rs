use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("point {0:?} lies on the surface plane; side is ambiguous")]
    OnSurfacePlane([f64; 3]),

    #[error("zero-length direction between coincident points")]
    ZeroLengthDirection,

    #[error("angle {0} rad is outside the pattern domain")]
    AngleOutOfDomain(f64),

    #[error("departure angle is exactly grazing (pi/2); pattern undefined")]
    GrazingDeparture,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("channel is singular or ill-conditioned (condition number {condition:.3e})")]
    SingularChannel { condition: f64 },

    #[error("search space of {size} combinations exceeds cap {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },

    #[error("optimal power ratio lies on the boundary (denominator {denominator:.3e} <= 0)")]
    BoundaryRegime { denominator: f64 },

    #[error("layout is not mirror-symmetric: {0}")]
    NotSymmetric(String),

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
