use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Two operands disagree in shape.
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// A documented precondition does not hold (wrong base point, bad argument).
    ContractViolation(String),
    /// Input sits on a degenerate set where the operation is undefined
    /// (rank deficiency, tied singular values, eigenvalue below the floor).
    Degenerate(String),
    /// The operation has no implementation on this manifold kind.
    UnsupportedKind { op: &'static str, kind: &'static str },
    /// The surrogate family cannot be built on this manifold kind.
    UnsupportedFamily {
        family: &'static str,
        kind: &'static str,
    },
    /// Log map requested outside the injectivity ball.
    OutsideInjectivity,
    /// Armijo backtracking needed more than 60 halvings.
    LineSearchFailure,
    /// Initial point violates a manifold or constraint invariant.
    InfeasibleInit(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { expected, found } => write!(
                f,
                "shape mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::ContractViolation(msg) => write!(f, "contract violation: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::UnsupportedKind { op, kind } => {
                write!(f, "{op} is not available on {kind}")
            }
            Error::UnsupportedFamily { family, kind } => {
                write!(f, "surrogate family {family} is not supported on {kind}")
            }
            Error::OutsideInjectivity => write!(f, "point outside the injectivity ball"),
            Error::LineSearchFailure => {
                write!(f, "line search failed after 60 backtracking steps")
            }
            Error::InfeasibleInit(msg) => write!(f, "infeasible initial point: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn contract(msg: &str) -> Error {
    Error::ContractViolation(String::from(msg))
}

pub(crate) fn degenerate(msg: &str) -> Error {
    Error::Degenerate(String::from(msg))
}
