use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input violates an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// A level or size guard was exceeded.
    #[error("capacity error: {0}")]
    Capacity(String),
    /// A parameter lies outside the domain where a special function converges.
    #[error("domain error: {0}")]
    Domain(String),
    /// An inner fixed point or iterative scheme failed to converge.
    #[error("scheme error: {0}")]
    Scheme(String),
    /// A quadrature did not reach its tolerance.
    #[error("integration error: {message} (refinement hint: {hint})")]
    Integration { message: String, hint: String },
    /// The linear system of an implicit step could not be solved.
    #[error("assembly error: {0}")]
    Assembly(String),
    /// A driver violated a declared Lipschitz or monotonicity constant.
    #[error("declared-constant error: {0}")]
    DeclaredConstant(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! usage {
    ($($arg:tt)*) => { $crate::error::Error::Usage(alloc::format!($($arg)*)) };
}
pub(crate) use usage;
