use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level {level} exceeds the configured maximum {max}")]
    Capacity { level: u32, max: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation error at {point:?}: {message}")]
    Eval { point: Vec<f64>, message: String },

    #[error("specification error: {0}")]
    Spec(String),

    #[error("singular point: {0}")]
    Singular(String),

    #[error("no convergence after {refinements} refinements: last estimates {previous} and {last} differ by {gap:e}")]
    Convergence { refinements: usize, gap: f64, previous: String, last: String },

    #[error("grid alignment error: {0}")]
    Alignment(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("possible zero divisor: x * inverse(x) misses 1 by {residual:e}")]
    ZeroDivisor { residual: f64 },

    #[error("stencil error: {0}")]
    Stencil(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Spec(_) | Error::Io(_) | Error::Alignment(_) => 2,
            Error::Convergence { .. } | Error::ZeroDivisor { .. } => 1,
            _ => 3,
        }
    }
}
