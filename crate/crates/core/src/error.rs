use thiserror::Error;

use crate::geometry::ElementKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate or parameter vector violates the bounds of its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Linear constraints whose intersection is empty.
    #[error("constraint conflict: {0}")]
    ConstraintConflict(String),

    #[error("degenerate distribution: nodes {first} and {second} are {distance:.3e} apart")]
    DegenerateDistribution {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("node set is not unisolvent: {0}")]
    Unisolvency(String),

    /// The orbit collection cannot reproduce the prescribed face distribution.
    #[error("incompatible collection: {0}")]
    IncompatibleCollection(String),

    #[error("no viable orbit collection for {kind} at degree {degree}")]
    NoViableCollection { kind: ElementKind, degree: usize },

    #[error("baseline {baseline} is not defined for {kind}")]
    UnsupportedBaseline { baseline: String, kind: ElementKind },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by user input rather than by the library.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Argument(_)
                | Error::Parse { .. }
                | Error::UnsupportedBaseline { .. }
        )
    }
}
