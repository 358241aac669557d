use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown problem `{0}` (expected one of example1, example2, example3)")]
    UnknownProblem(String),

    #[error("initial state is not strictly below the event set: g(x0) = {g0:e}")]
    NonNegativeStart { g0: f64 },

    #[error("transversality violated: grad g . f = {value:e} < delta_min = {delta_min:e}")]
    TransversalityViolation { value: f64, delta_min: f64 },

    #[error("analytic gradient disagrees with finite differences at {point:?}: {analytic:e} vs {numeric:e}")]
    GradientMismatch {
        point: Vec<f64>,
        analytic: f64,
        numeric: f64,
    },

    #[error("quadrature average of grad g is degenerate: norm {norm:e}")]
    DegenerateGradient { norm: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("surface sampling needs a 3-dimensional problem, got dimension {0}")]
    UnsupportedDimension(usize),

    #[error("step {step}: {inner}")]
    AtStep { step: usize, inner: Box<Error> },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            inner: Box::new(self),
        }
    }

    /// Strips any step annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { inner, .. } => inner.root(),
            other => other,
        }
    }
}
