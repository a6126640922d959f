use core::fmt;

/// Errors raised by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Transfer function numerator degree exceeds the denominator degree.
    Improper { num_degree: usize, den_degree: usize },
    /// Leading denominator coefficient is zero (or the denominator is empty).
    ZeroLeadingCoefficient,
    /// Sample time must be positive and finite.
    InvalidSampleTime(f64),
    /// Two systems in an interconnection disagree on their sample time.
    SampleTimeMismatch { left: f64, right: f64 },
    /// Matrix or signal shapes do not agree.
    DimensionMismatch(&'static str),
    /// `I + D` (or an equivalent feedthrough term) is singular.
    AlgebraicLoop,
    /// The system is not asymptotically stable.
    Unstable { spectral_radius: f64 },
    /// The certified norm tail bound did not shrink below tolerance.
    NormNotConverged { horizon: usize },
    /// A parameter lies outside its admissible range.
    InvalidParameter(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Improper {
                num_degree,
                den_degree,
            } => write!(
                f,
                "improper transfer function: numerator degree {num_degree} > denominator degree {den_degree}"
            ),
            Error::ZeroLeadingCoefficient => {
                write!(f, "denominator leading coefficient must be nonzero")
            }
            Error::InvalidSampleTime(ts) => write!(f, "invalid sample time {ts}"),
            Error::SampleTimeMismatch { left, right } => {
                write!(f, "sample time mismatch: {left} vs {right}")
            }
            Error::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            Error::AlgebraicLoop => write!(f, "algebraic loop: feedthrough term is singular"),
            Error::Unstable { spectral_radius } => {
                write!(f, "system is unstable (spectral radius {spectral_radius})")
            }
            Error::NormNotConverged { horizon } => {
                write!(f, "norm tail bound did not converge within {horizon} samples")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

impl core::error::Error for Error {}
