use thiserror::Error;

/// Pointwise evaluation failures shared by potentials, generators and Lyapunov candidates.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("not differentiable at {point:?}: {what}")]
    SingularPoint { point: Vec<f64>, what: String },
    #[error("point {point:?} lies outside the domain of {what}")]
    OutOfDomain { point: Vec<f64>, what: String },
    #[error("non-finite value of {what} at {point:?}")]
    NonFinite { point: Vec<f64>, what: String },
}

pub(crate) fn pt<T: crate::Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.f64()).collect()
}
