use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Azimuth undefined because the direction vector is parallel to the z-axis.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Matrix inversion refused. `condition` is the condition number of the
    /// diagonally scaled matrix (infinite for non-positive eigenvalues).
    #[error("singular matrix in {context} (condition number {condition:e})")]
    Singular { context: String, condition: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("no valid specular reflection: {0}")]
    NoReflection(String),

    #[error("scenario has no propagation paths")]
    NoPaths,

    #[error("paths {first} and {second} have indistinguishable parameters")]
    DuplicatePaths { first: usize, second: usize },

    #[error("line-of-sight path absent")]
    LosAbsent,

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn singular(context: impl Into<String>, condition: f64) -> Self {
        Error::Singular {
            context: context.into(),
            condition,
        }
    }
}
