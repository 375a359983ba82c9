use alloc::string::String;

/// Errors raised by the core algorithms.
///
/// Contract violations (dimension and domain errors) are separated from
/// numerical failures so callers can map them to distinct exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// Inputs that must agree in shape do not.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// A chain carries fewer draws than the operation needs.
    #[error("too few draws: need at least {needed}, got {got}")]
    TooFewDraws { needed: usize, got: usize },

    /// A non-finite value where the contract requires finite input.
    #[error("non-finite value in {context} at ({row}, {col})")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
    },

    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced an invalid number (NaN, non-positive density,
    /// quadrature breakdown).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The optimizer exhausted its iteration budget; the best iterate found
    /// is carried along.
    #[error("no convergence after {iterations} iterations (objective {objective})")]
    Convergence {
        iterations: u64,
        objective: f64,
        best: alloc::vec::Vec<f64>,
    },

    /// A thinning size that violates the resampling bound, naming the
    /// cluster at which the bound binds.
    #[error(
        "thinning bound violated: s_thin={s_thin} exceeds S_k/w_k={bound} at cluster {cluster}"
    )]
    BoundViolation {
        s_thin: usize,
        bound: f64,
        cluster: usize,
    },
}

impl CoreError {
    pub(crate) fn dim(context: &str, expected: usize, actual: usize) -> Self {
        CoreError::DimensionMismatch {
            context: String::from(context),
            expected,
            actual,
        }
    }
}
