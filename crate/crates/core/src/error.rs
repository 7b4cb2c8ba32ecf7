use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point set is empty: {0}")]
    EmptyPointSet(&'static str),

    #[error("points {first} and {second} coincide (chord distance {chord:e})")]
    DuplicatePoints {
        first: usize,
        second: usize,
        chord: f64,
    },

    #[error("matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("collocation system has not been solved")]
    Unsolved,

    #[error("quadrature did not converge: relative change {change:e} with {nodes} nodes")]
    Quadrature { nodes: usize, change: f64 },

    #[error("profile has a linear term {0:e}; its operator image is singular at r = 0")]
    SingularProfile(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
