use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("operands live in different rings")]
    RingMismatch,
    #[error("Laurent exponent fell below the floor -{floor}")]
    TruncationOverflow { floor: String },
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("element is not a unit at this precision")]
    NotAUnit,
    #[error("resource bound exceeded: {0}")]
    ResourceBound(String),
    #[error("witness does not verify: {0}")]
    BadWitness(String),
    #[error("norm too large: {0}")]
    NormTooLarge(String),
    #[error("element is not primitive")]
    NotPrimitive,
    #[error("zero divisor: {0}")]
    ZeroDivisor(String),
    #[error("unsupported covering: g must be 1 or 1 - f")]
    UnsupportedCovering,
    #[error("factorization does not converge: {0}")]
    NonConvergent(String),
    #[error("no approximant found up to m = {0}")]
    ApproximantNotFound(u32),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
