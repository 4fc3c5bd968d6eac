use thiserror::Error;

/// Errors raised by samplers, models and oracles.
///
/// Time indices are zero-based positions in `0..T`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate weights at time index {t}: all log-weights are -inf or NaN")]
    DegenerateWeights { t: usize },

    #[error("reference tail unreachable at time index {t}: all ancestor weights are -inf")]
    UnreachableReference { t: usize },

    #[error("non-finite state at time index {t}")]
    NonFiniteState { t: usize },

    #[error("degenerate backward weights at time index {t}")]
    DegenerateBackwardWeights { t: usize },

    #[error("numerical failure at time index {t}: {msg}")]
    Numerical { t: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("support violation: Q({index}) = 0 while P({index}) > 0")]
    SupportViolation { index: usize },

    #[error("enumeration needs {atoms} atoms per reference, above the guard of {limit}")]
    EnumerationTooLarge { atoms: u128, limit: u128 },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tags the error with the sampler iteration it happened in (0 for
    /// initialization).
    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// Time index carried by the innermost error, if any.
    pub fn time_index(&self) -> Option<usize> {
        match self {
            Error::DegenerateWeights { t }
            | Error::UnreachableReference { t }
            | Error::NonFiniteState { t }
            | Error::DegenerateBackwardWeights { t }
            | Error::Numerical { t, .. } => Some(*t),
            Error::AtIteration { source, .. } => source.time_index(),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
