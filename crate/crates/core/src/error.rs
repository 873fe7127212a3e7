use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated an operation's contract (non-finite value, negative
    /// Lamb-Dicke parameter, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested quantity is not defined for this input, e.g. the
    /// Lamb-Dicke expansion of a carrier shift.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numerical procedure failed to converge or hit an
    /// unrecoverable condition.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A requested basis or table is too large to allocate.
    #[error("resource error: {0}")]
    Resource(String),

    /// Eigenvector-overlap tracking could not decide how a branch continues
    /// inside the detuning interval `[lo, hi]`.
    #[error("branch tracking is ambiguous for detuning in [{lo}, {hi}]; refine the grid")]
    AmbiguousBranch { lo: f64, hi: f64 },
}
