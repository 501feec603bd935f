use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("jet order {order} exceeds the configured maximum {max}")]
    MaxOrderExceeded { order: u32, max: u32 },
    #[error("exponent is not an integer: {0}")]
    NonIntegerExponent(String),
    #[error("cannot divide by {0}")]
    NotInvertible(String),
    #[error("no value bound for {0}")]
    Unbound(String),
    #[error("{0} has no exact rational value")]
    Transcendental(String),
    #[error("form degree {0} exceeds the supported maximum of 3")]
    DegreeOverflow(usize),
    #[error("slot {slot} carries no derivative in direction {direction}")]
    NoDerivativeInSlot { slot: usize, direction: usize },
    #[error("representative enumeration exceeded the limit of {0} forms")]
    CombinatorialLimit(usize),
    #[error("expression grew beyond {0} terms")]
    TermLimit(usize),
    #[error("equation {0} is not semi-explicit in a leading derivative")]
    NotSemiExplicit(String),
    #[error("on-solutions substitution did not reach a fixed point")]
    SubstitutionCycle,
    #[error("unsupported coefficient class: {0}")]
    UnsupportedClass(String),
    #[error("the system is not variational")]
    NotVariational,
    #[error("variation does not vanish on the boundary: {0}")]
    BoundaryNotVanishing(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
