//! Explicit rate functions and constants: `ψ` from `φ`, Lyapunov-Poincaré constants, `β_W`, `ξ`,
//! the weak Poincaré `β`, truncation bounds and envelopes.

mod beta;
mod constants;
mod envelope;
mod psi;
mod sobolev;
mod xi;

pub use beta::{beta_w_closed, BetaValue, BetaWDef};
pub use constants::{clp, cw, halved_linear, halved_phi, ConstantCase, ConstantResult};
pub use envelope::{
    lp_truncation_bound, mt_entropy_envelope, mt_variance_envelope, variance_moment_exponent, EnvelopeBound,
    Explicitness, Moments,
};
pub use psi::{psi_from_phi, PsiProfile};
pub use sobolev::{psi_sobolev, psi_sobolev_d1, psi_sobolev_d2};
pub use xi::{weak_beta, xi_inverse, XiConvention, XiProfile};

use crate::error::EvalError;
use crate::lyapunov::LyapunovError;
use crate::potentials::MeasureError;
use crate::Real;

#[derive(Debug, thiserror::Error)]
pub enum RateError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{what} is bounded (sup {sup}); psi is undefined beyond it")]
    Unbounded { what: String, sup: f64 },
    #[error("truncation-limited: s = {s} is below the tail floor {floor}")]
    TruncationLimited { s: f64, floor: f64 },
    #[error("search window: {0}")]
    Window(String),
    #[error("not monotone: {0}")]
    NotMonotone(String),
    #[error("missing moment: {0}")]
    MissingMoment(&'static str),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

/// `true` when `values` never moves against `direction` by more than `slack`.
pub fn is_monotone<T: Real>(values: &[T], increasing: bool, slack: T) -> bool {
    values.windows(2).all(|w| {
        if increasing {
            w[1] >= w[0] - slack
        } else {
            w[1] <= w[0] + slack
        }
    })
}
